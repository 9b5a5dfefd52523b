"""Record types produced by ingestion and weekly alignment."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime

MARKET = "MARKET"


@dataclass(frozen=True)
class Candle:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self) -> None:
        if self.volume < 0:
            raise ValueError(f"{self.date}: volume must be non-negative, got {self.volume}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise ValueError(
                f"{self.date}: inconsistent candle o={self.open} h={self.high} l={self.low} c={self.close}"
            )


@dataclass(frozen=True)
class WeeklyAssetRecord:
    """One asset-week. ``daily_candles`` always holds 7 entries after gap filling."""

    asset_id: str
    week_index: int
    week_start: date
    daily_candles: tuple[Candle, ...]
    market_cap_last_day: float | None
    weekly_return: float | None
    quality_flags: tuple[str, ...] = ()

    @property
    def open(self) -> float:
        return self.daily_candles[0].open

    @property
    def close(self) -> float:
        return self.daily_candles[-1].close

    @property
    def high(self) -> float:
        return max(c.high for c in self.daily_candles)

    @property
    def low(self) -> float:
        return min(c.low for c in self.daily_candles)

    @property
    def volume(self) -> float:
        return sum(c.volume for c in self.daily_candles)

    @property
    def week_end(self) -> date:
        return self.daily_candles[-1].date


@dataclass(frozen=True)
class NewsHeadline:
    week_index: int
    published_at: datetime
    title: str
    source: str

    def __post_init__(self) -> None:
        if not self.title.strip():
            raise ValueError("headline title must be non-empty")


@dataclass(frozen=True)
class MarketWeekRecord:
    week_index: int
    market_return: float | None
    search_index_btc: float | None = None
    search_index_crypto: float | None = None
    wallet_count: float | None = None
    active_addresses: float | None = None
    tx_count: float | None = None
    payments_count: float | None = None
    news: tuple[NewsHeadline, ...] = ()
    index_level: float | None = None


@dataclass(frozen=True)
class UniverseSnapshot:
    week_index: int
    members: tuple[str, ...]
    market_caps: dict[str, float] = field(default_factory=dict, compare=False)
