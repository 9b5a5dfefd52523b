"""Provider clients with a fixture-directory mode.

Each provider turns an upstream payload into normalized daily rows matching
``cache.SCHEMAS[provider.kind]``. In fixture mode the payload is read from
``{fixture_dir}/{provider.name}/...`` with the same shape the live endpoint
returns, so the normalizer is exercised identically online and offline.
Fixture files hold the full history for a subject; the query window is
applied client-side.
"""

from __future__ import annotations

import json
import logging
import random
import time
import xml.etree.ElementTree as ET
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Any, Protocol, TypeVar

import httpx

from ..errors import IngestionError, ProviderError, RetryableError
from .cache import DataCache
from .types import MARKET

log = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class QueryWindow:
    start: date
    end: date

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("query window end precedes start")

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end


class Provider(Protocol):
    name: str
    kind: str

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]: ...


def _utc_day(ms_or_s: float, *, millis: bool) -> date:
    seconds = ms_or_s / 1000.0 if millis else float(ms_or_s)
    return datetime.fromtimestamp(seconds, tz=timezone.utc).date()


def _number(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise IngestionError(field_name, f"expected a number, got {value!r}")
    return float(value)


def _pairs(payload: Mapping[str, Any], key: str) -> list[list[Any]]:
    if key not in payload:
        raise IngestionError(key, "missing from payload")
    series = payload[key]
    if not isinstance(series, list) or any(not isinstance(p, list) or len(p) < 2 for p in series):
        raise IngestionError(key, "expected a list of [timestamp, value] pairs")
    return series


@dataclass
class HttpSource:
    """Thin httpx wrapper mapping transport failures onto the error taxonomy."""

    base_url: str
    api_key: str | None = None
    api_key_header: str = "x-cg-pro-api-key"
    timeout: float = 30.0
    client: httpx.Client | None = None

    def get(self, path: str, params: Mapping[str, Any] | None = None) -> httpx.Response:
        headers = {self.api_key_header: self.api_key} if self.api_key else {}
        client = self.client or httpx.Client(timeout=self.timeout)
        try:
            resp = client.get(f"{self.base_url.rstrip('/')}/{path.lstrip('/')}", params=params, headers=headers)
        except httpx.TransportError as exc:
            raise RetryableError(f"GET {path}: {exc}") from exc
        finally:
            if self.client is None:
                client.close()
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableError(f"GET {path}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"GET {path}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp

    def get_json(self, path: str, params: Mapping[str, Any] | None = None) -> Any:
        resp = self.get(path, params)
        try:
            return resp.json()
        except ValueError as exc:
            raise IngestionError("body", "response is not JSON") from exc


def _read_fixture(path: Path) -> Any:
    if not path.exists():
        raise ProviderError(f"fixture not found: {path}")
    text = path.read_text(encoding="utf-8")
    return json.loads(text) if path.suffix == ".json" else text


@dataclass
class CoinGeckoProvider:
    """CoinGecko-compatible price, volume and market-cap source.

    Live mode calls ``/coins/{id}/market_chart/range`` (prices, market caps,
    total volumes) and ``/coins/{id}/ohlc/range``. Fixture mode reads
    ``coingecko/{SYMBOL}/market_chart.json`` and, if present,
    ``coingecko/{SYMBOL}/ohlc.json``.
    """

    http: HttpSource | None = None
    fixture_dir: Path | None = None
    coin_ids: Mapping[str, str] = field(default_factory=dict)
    vs_currency: str = "usd"
    name: str = "coingecko"
    kind: str = "ohlcv"

    def _payloads(self, subject: str, window: QueryWindow) -> tuple[dict[str, Any], list[Any] | None]:
        if self.fixture_dir is not None:
            base = Path(self.fixture_dir) / self.name / subject
            chart = _read_fixture(base / "market_chart.json")
            ohlc_path = base / "ohlc.json"
            return chart, (_read_fixture(ohlc_path) if ohlc_path.exists() else None)
        if self.http is None:
            raise ProviderError("coingecko provider has neither base URL nor fixture directory")
        coin = self.coin_ids.get(subject, subject.lower())
        start = datetime.combine(window.start, datetime.min.time(), tzinfo=timezone.utc)
        end = datetime.combine(window.end + timedelta(days=1), datetime.min.time(), tzinfo=timezone.utc)
        params = {"vs_currency": self.vs_currency, "from": int(start.timestamp()), "to": int(end.timestamp())}
        chart = self.http.get_json(f"coins/{coin}/market_chart/range", params)
        ohlc = self.http.get_json(f"coins/{coin}/ohlc/range", {**params, "interval": "daily"})
        return chart, ohlc

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]:
        chart, ohlc = self._payloads(subject, window)
        if not isinstance(chart, dict):
            raise IngestionError("market_chart", "expected an object")
        closes: dict[date, float] = {}
        for ts, price in _pairs(chart, "prices"):
            closes[_utc_day(_number(ts, "prices"), millis=True)] = _number(price, "prices")
        caps = {
            _utc_day(_number(ts, "market_caps"), millis=True): _number(v, "market_caps")
            for ts, v in _pairs(chart, "market_caps")
        }
        volumes = {
            _utc_day(_number(ts, "total_volumes"), millis=True): _number(v, "total_volumes")
            for ts, v in _pairs(chart, "total_volumes")
        }
        bars: dict[date, tuple[float, float, float, float]] = {}
        if ohlc is not None:
            if not isinstance(ohlc, list):
                raise IngestionError("ohlc", "expected a list")
            for row in ohlc:
                if not isinstance(row, list) or len(row) != 5:
                    raise IngestionError("ohlc", f"expected [ts, o, h, l, c], got {row!r}")
                ts, o, h, l, c = (_number(x, "ohlc") for x in row)
                bars[_utc_day(ts, millis=True)] = (o, h, l, c)

        rows = []
        prev_close: float | None = None
        for day in sorted(closes):
            close = closes[day]
            if day in bars:
                o, h, l, c = bars[day]
            else:
                o = prev_close if prev_close is not None else close
                c = close
                h, l = max(o, c), min(o, c)
            prev_close = c
            if not window.contains(day):
                continue
            volume = volumes.get(day)
            if volume is None:
                raise IngestionError("volume", f"missing for {day}")
            if volume < 0:
                raise IngestionError("volume", f"negative value {volume} on {day}")
            if min(o, h, l, c) <= 0:
                raise IngestionError("close", f"non-positive price on {day}")
            if l > min(o, c) or h < max(o, c):
                raise IngestionError("high", f"inconsistent OHLC on {day}")
            cap = caps.get(day)
            if cap is not None and cap < 0:
                raise IngestionError("market_cap", f"negative value on {day}")
            rows.append(
                {
                    "date": day.isoformat(),
                    "open": o,
                    "high": h,
                    "low": l,
                    "close": c,
                    "volume": volume,
                    "market_cap": cap,
                }
            )
        return rows


ONCHAIN_CHARTS = {
    "wallet_count": "my-wallet-n-users",
    "active_addresses": "n-unique-addresses",
    "tx_count": "n-transactions",
    "payments_count": "n-payments",
}


@dataclass
class BlockchainInfoProvider:
    """Bitcoin on-chain counts from a Blockchain.info-style charts API.

    Each chart payload is ``{"values": [{"x": unix_seconds, "y": value}, ...]}``;
    fixtures live at ``blockchain/{chart}.json``.
    """

    http: HttpSource | None = None
    fixture_dir: Path | None = None
    name: str = "blockchain"
    kind: str = "onchain"

    def _chart(self, chart: str, window: QueryWindow) -> Any:
        if self.fixture_dir is not None:
            return _read_fixture(Path(self.fixture_dir) / self.name / f"{chart}.json")
        if self.http is None:
            raise ProviderError("on-chain provider has neither base URL nor fixture directory")
        days = (window.end - window.start).days + 1
        return self.http.get_json(
            f"charts/{chart}", {"start": window.start.isoformat(), "timespan": f"{days}days", "format": "json"}
        )

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]:
        merged: dict[date, dict[str, Any]] = {}
        for column, chart in ONCHAIN_CHARTS.items():
            payload = self._chart(chart, window)
            values = payload.get("values") if isinstance(payload, dict) else None
            if not isinstance(values, list):
                raise IngestionError(column, "chart payload lacks a 'values' list")
            for point in values:
                if not isinstance(point, dict) or "x" not in point or "y" not in point:
                    raise IngestionError(column, f"malformed point {point!r}")
                day = _utc_day(_number(point["x"], column), millis=False)
                value = _number(point["y"], column)
                if value < 0:
                    raise IngestionError(column, f"negative count on {day}")
                if window.contains(day):
                    merged.setdefault(day, {"date": day.isoformat()})[column] = value
        return [merged[d] for d in sorted(merged)]


@dataclass
class SearchTrendsProvider:
    """Search-interest index for "Bitcoin" and "cryptocurrency".

    There is no official public trends API, so this provider is fixture-only:
    ``trends/bitcoin.json`` and ``trends/cryptocurrency.json`` each holding
    ``{"values": [{"date": "YYYY-MM-DD", "value": n}, ...]}``.
    """

    fixture_dir: Path | None = None
    name: str = "trends"
    kind: str = "search"
    terms: Mapping[str, str] = field(default_factory=lambda: {"btc": "bitcoin", "crypto": "cryptocurrency"})

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]:
        if self.fixture_dir is None:
            raise ProviderError("search trends are only available from a fixture directory")
        merged: dict[date, dict[str, Any]] = {}
        for column, term in self.terms.items():
            payload = _read_fixture(Path(self.fixture_dir) / self.name / f"{term}.json")
            values = payload.get("values") if isinstance(payload, dict) else None
            if not isinstance(values, list):
                raise IngestionError(column, "payload lacks a 'values' list")
            for point in values:
                try:
                    day = date.fromisoformat(point["date"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise IngestionError("date", f"bad point {point!r}") from exc
                value = _number(point.get("value"), column)
                if window.contains(day):
                    merged.setdefault(day, {"date": day.isoformat()})[column] = value
        return [merged[d] for d in sorted(merged)]


@dataclass
class NewsFeedProvider:
    """Headlines from an RSS 2.0 feed (Cointelegraph publishes one at ``/rss``)."""

    http: HttpSource | None = None
    fixture_dir: Path | None = None
    feed_path: str = "rss"
    source_name: str = "Cointelegraph"
    name: str = "cointelegraph"
    kind: str = "news"

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]:
        if self.fixture_dir is not None:
            xml_text = _read_fixture(Path(self.fixture_dir) / self.name / "rss.xml")
        elif self.http is not None:
            xml_text = self.http.get(self.feed_path).text
        else:
            raise ProviderError("news provider has neither base URL nor fixture directory")
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise IngestionError("rss", str(exc)) from exc
        rows = []
        for item in root.iter("item"):
            title = (item.findtext("title") or "").strip()
            if not title:
                raise IngestionError("title", "empty headline")
            raw_date = item.findtext("pubDate")
            if not raw_date:
                raise IngestionError("pubDate", f"missing for {title!r}")
            try:
                published = parsedate_to_datetime(raw_date).astimezone(timezone.utc)
            except (TypeError, ValueError) as exc:
                raise IngestionError("pubDate", raw_date) from exc
            if window.contains(published.date()):
                rows.append({"published_at": published.isoformat(), "title": title, "source": self.source_name})
        return rows


@dataclass
class IndexProvider:
    """Benchmark index closes (e.g. a crypto market index); fixture ``index/{subject}.json``."""

    fixture_dir: Path | None = None
    name: str = "index"
    kind: str = "index"

    def fetch(self, subject: str, window: QueryWindow) -> list[dict[str, Any]]:
        if self.fixture_dir is None:
            raise ProviderError("index levels are only available from a fixture directory")
        payload = _read_fixture(Path(self.fixture_dir) / self.name / f"{subject}.json")
        values = payload.get("values") if isinstance(payload, dict) else None
        if not isinstance(values, list):
            raise IngestionError("values", "payload lacks a 'values' list")
        rows = []
        for point in values:
            day = date.fromisoformat(point["date"])
            level = _number(point.get("close"), "close")
            if level <= 0:
                raise IngestionError("close", f"non-positive level on {day}")
            if window.contains(day):
                rows.append({"date": day.isoformat(), "close": level})
        return rows


def with_retries(
    fn: Callable[[], T],
    *,
    max_retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Call ``fn``; retry ``RetryableError`` with exponential backoff and jitter."""
    attempt = 0
    while True:
        try:
            return fn()
        except RetryableError:
            if attempt >= max_retries:
                raise
            delay = backoff * (2**attempt) * (1 + 0.1 * random.random())
            log.warning("retryable failure, attempt %d/%d, sleeping %.2fs", attempt + 1, max_retries, delay)
            sleep(delay)
            attempt += 1


def fetch_provider(
    provider: Provider,
    subjects: Iterable[str],
    window: QueryWindow,
    cache: DataCache,
    *,
    parallelism: int = 4,
    max_retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, Path]:
    """Fetch every subject and write its normalized series into ``cache``.

    Subjects are fetched concurrently up to ``parallelism``; cache writes are
    serialized per series. Returns the written CSV path per subject.
    """
    subjects = list(dict.fromkeys(subjects)) or [MARKET]

    def one(subject: str) -> tuple[str, Path]:
        rows = with_retries(
            lambda: provider.fetch(subject, window), max_retries=max_retries, backoff=backoff, sleep=sleep
        )
        return subject, cache.write_series(provider.kind, subject, rows, source=provider.name)

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        return dict(pool.map(one, subjects))
