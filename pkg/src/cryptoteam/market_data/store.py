"""Read-side view over the cache: weekly records, market weeks and universes."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable
from datetime import date, datetime, timedelta
from functools import cached_property

from .cache import DataCache
from .resample import MONDAY, parse_weekday, resample_daily_to_weekly, week_index_of, week_start_of
from .types import Candle, MarketWeekRecord, NewsHeadline, UniverseSnapshot, WeeklyAssetRecord
from .universe import UNIVERSE_SIZE, select_universe


def _float(value: str) -> float | None:
    return float(value) if value not in ("", None) else None


class MarketDataStore:
    """Weekly-aligned data for the whole asset set.

    All assets share one ``origin`` so week indices line up. Safe for
    concurrent reads once constructed (the lazily built views are idempotent).
    """

    def __init__(
        self,
        cache: DataCache,
        origin: date,
        week_boundary: int | str = MONDAY,
        *,
        universe_size: int = UNIVERSE_SIZE,
        exclude_stablecoins: bool = False,
    ) -> None:
        self.cache = cache
        self.week_boundary = parse_weekday(week_boundary)
        self.origin = week_start_of(origin, self.week_boundary)
        self.universe_size = universe_size
        self.exclude_stablecoins = exclude_stablecoins

    def week_start(self, week_index: int) -> date:
        return self.origin + timedelta(days=7 * week_index)

    def week_end(self, week_index: int) -> date:
        return self.week_start(week_index) + timedelta(days=6)

    def week_of(self, day: date) -> int:
        return week_index_of(day, self.origin, self.week_boundary)

    @cached_property
    def assets(self) -> tuple[str, ...]:
        return tuple(self.cache.keys("ohlcv"))

    @cached_property
    def _daily(self) -> dict[str, tuple[list[Candle], dict[date, float]]]:
        out = {}
        for asset in self.assets:
            candles, caps = [], {}
            for row in self.cache.read_series("ohlcv", asset):
                day = date.fromisoformat(row["date"])
                candles.append(
                    Candle(
                        day,
                        float(row["open"]),
                        float(row["high"]),
                        float(row["low"]),
                        float(row["close"]),
                        float(row["volume"]),
                    )
                )
                cap = _float(row.get("market_cap", ""))
                if cap is not None:
                    caps[day] = cap
            out[asset] = (candles, caps)
        return out

    def daily(self, asset: str) -> list[Candle]:
        return self._daily[asset][0]

    def daily_window(self, asset: str, end: date, days: int) -> list[Candle]:
        """The ``days`` most recent candles on or before ``end``."""
        candles = [c for c in self.daily(asset) if c.date <= end]
        return candles[-days:]

    @cached_property
    def _weekly(self) -> dict[str, dict[int, WeeklyAssetRecord]]:
        out = {}
        for asset in self.assets:
            candles, caps = self._daily[asset]
            records = resample_daily_to_weekly(
                candles, self.week_boundary, asset_id=asset, market_caps=caps, origin=self.origin
            )
            out[asset] = {r.week_index: r for r in records}
        return out

    def weekly(self, asset: str) -> dict[int, WeeklyAssetRecord]:
        return self._weekly[asset]

    def record(self, asset: str, week_index: int) -> WeeklyAssetRecord | None:
        return self._weekly.get(asset, {}).get(week_index)

    def weekly_return(self, asset: str, week_index: int) -> float | None:
        rec = self.record(asset, week_index)
        return rec.weekly_return if rec is not None else None

    def exit_return(self, asset: str, week_index: int) -> float | None:
        """Return of a position held to the end of a week in which ``asset`` stopped trading.

        Settles at the last close observed on or before the week end against
        the previous week's close; ``None`` without a previous-week record.
        """
        prev = self.record(asset, week_index - 1)
        if prev is None:
            return None
        last = self.daily_window(asset, self.week_end(week_index), 1)
        if not last:
            return None
        return last[0].close / prev.daily_candles[-1].close - 1.0

    def universe(self, week_index: int) -> UniverseSnapshot:
        caps = {}
        for asset in self.assets:
            rec = self.record(asset, week_index)
            if rec is not None and rec.market_cap_last_day is not None:
                caps[asset] = rec.market_cap_last_day
        if not caps:
            return UniverseSnapshot(week_index, ())
        return select_universe(
            week_index, caps, self.universe_size, exclude_stablecoins=self.exclude_stablecoins
        )

    @cached_property
    def weeks(self) -> tuple[int, ...]:
        found: set[int] = set()
        for per_asset in self._weekly.values():
            found.update(per_asset)
        return tuple(sorted(found))

    def _weekly_mean(self, kind: str, columns: Iterable[str]) -> dict[int, dict[str, float]]:
        sums: dict[int, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
        for row in self.cache.read_series(kind, "MARKET"):
            week = self.week_of(date.fromisoformat(row["date"]))
            for col in columns:
                value = _float(row.get(col, ""))
                if value is not None:
                    sums[week][col].append(value)
        return {w: {c: math.fsum(v) / len(v) for c, v in cols.items()} for w, cols in sums.items()}

    def _index_levels(self) -> dict[int, float]:
        levels: dict[int, tuple[date, float]] = {}
        for row in self.cache.read_series("index", "MARKET"):
            day = date.fromisoformat(row["date"])
            week = self.week_of(day)
            if week not in levels or levels[week][0] < day:
                levels[week] = (day, float(row["close"]))
        return {w: v for w, (_, v) in levels.items()}

    def _cap_weighted_return(self, week_index: int) -> float | None:
        prev = self.universe(week_index - 1)
        num = den = 0.0
        for asset in prev.members:
            r = self.weekly_return(asset, week_index)
            cap = prev.market_caps.get(asset)
            if r is None or cap is None:
                continue
            num += cap * r
            den += cap
        return num / den if den > 0 else None

    @cached_property
    def market_weeks(self) -> dict[int, MarketWeekRecord]:
        onchain = self._weekly_mean("onchain", ("wallet_count", "active_addresses", "tx_count", "payments_count"))
        search = self._weekly_mean("search", ("btc", "crypto"))
        index = self._index_levels()
        news: dict[int, list[NewsHeadline]] = defaultdict(list)
        for row in self.cache.read_series("news", "MARKET"):
            ts = datetime.fromisoformat(row["published_at"])
            week = self.week_of(ts.date())
            news[week].append(NewsHeadline(week, ts, row["title"], row.get("source", "")))

        weeks = sorted(set(self.weeks) | set(onchain) | set(search) | set(index) | set(news))
        out = {}
        for w in weeks:
            if index:
                level, prev_level = index.get(w), index.get(w - 1)
                mret = level / prev_level - 1.0 if level is not None and prev_level is not None else None
            else:
                level, mret = None, self._cap_weighted_return(w)
            oc, se = onchain.get(w, {}), search.get(w, {})
            out[w] = MarketWeekRecord(
                week_index=w,
                market_return=mret,
                search_index_btc=se.get("btc"),
                search_index_crypto=se.get("crypto"),
                wallet_count=oc.get("wallet_count"),
                active_addresses=oc.get("active_addresses"),
                tx_count=oc.get("tx_count"),
                payments_count=oc.get("payments_count"),
                news=tuple(sorted(news.get(w, ()), key=lambda h: (h.published_at, h.title))),
                index_level=level,
            )
        return out

    def market_week(self, week_index: int) -> MarketWeekRecord | None:
        return self.market_weeks.get(week_index)
