"""Ingestion, caching and weekly alignment of raw market data."""

from .cache import SCHEMAS, DataCache
from .providers import (
    BlockchainInfoProvider,
    CoinGeckoProvider,
    HttpSource,
    IndexProvider,
    NewsFeedProvider,
    QueryWindow,
    SearchTrendsProvider,
    fetch_provider,
    with_retries,
)
from .resample import MONDAY, parse_weekday, resample_daily_to_weekly, week_index_of, week_start_of
from .store import MarketDataStore
from .types import MARKET, Candle, MarketWeekRecord, NewsHeadline, UniverseSnapshot, WeeklyAssetRecord
from .universe import STABLECOINS, UNIVERSE_SIZE, select_universe

__all__ = [
    "MARKET",
    "MONDAY",
    "SCHEMAS",
    "STABLECOINS",
    "UNIVERSE_SIZE",
    "BlockchainInfoProvider",
    "Candle",
    "CoinGeckoProvider",
    "DataCache",
    "HttpSource",
    "IndexProvider",
    "MarketDataStore",
    "MarketWeekRecord",
    "NewsFeedProvider",
    "NewsHeadline",
    "QueryWindow",
    "SearchTrendsProvider",
    "UniverseSnapshot",
    "WeeklyAssetRecord",
    "fetch_provider",
    "parse_weekday",
    "resample_daily_to_weekly",
    "select_universe",
    "week_index_of",
    "week_start_of",
    "with_retries",
]
