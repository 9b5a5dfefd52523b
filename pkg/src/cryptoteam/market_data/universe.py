from __future__ import annotations

from collections.abc import Mapping

from .types import UniverseSnapshot

UNIVERSE_SIZE = 30

# Symbols treated as stablecoins when ``exclude_stablecoins`` is on.
STABLECOINS = frozenset({"USDT", "USDC", "DAI", "BUSD", "TUSD", "FDUSD", "USDD", "PYUSD", "USDE", "FRAX", "USDP"})


def select_universe(
    week_index: int,
    marketcaps: Mapping[str, float],
    size: int = UNIVERSE_SIZE,
    *,
    exclude_stablecoins: bool = False,
) -> UniverseSnapshot:
    """Top ``size`` assets by market cap, descending; ties go to the smaller asset id."""
    if not marketcaps:
        raise ValueError("marketcaps must be non-empty")
    eligible = {
        asset: cap
        for asset, cap in marketcaps.items()
        if cap is not None and not (exclude_stablecoins and asset.upper() in STABLECOINS)
    }
    ranked = sorted(eligible, key=lambda a: (-eligible[a], a))[:size]
    return UniverseSnapshot(week_index, tuple(ranked), {a: eligible[a] for a in ranked})
