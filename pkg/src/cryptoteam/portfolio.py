"""Quintile portfolios on rise probabilities, cash-crypto allocation and weekly accounting."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .collaboration import TeamEnsemble
from .errors import UndefinedMetricError
from .factors import Trend
from .quintiles import QuintileLabel, partition

RISE_WEIGHT = 1.0
FALL_WEIGHT = 0.5
LEDGER_COLUMNS = ("week", "decision", "w", "holdings", "weekly_return", "value")


@dataclass(frozen=True)
class QuintilePortfolios:
    week_index: int
    buckets: dict[QuintileLabel, tuple[str, ...]]
    source: dict[str, float]
    degenerate: bool = False

    def members(self, label: QuintileLabel) -> tuple[str, ...]:
        return self.buckets.get(label, ())


def form_quintiles(week_index: int, probs: Mapping[str, float]) -> QuintilePortfolios:
    """Five equal-count buckets by ascending probability (ties by asset id).

    Fewer than five assets gives a single Medium bucket flagged degenerate.
    """
    if len(probs) < 5:
        return QuintilePortfolios(
            week_index, {QuintileLabel.Medium: tuple(sorted(probs))}, dict(probs), degenerate=True
        )
    buckets = {label: tuple(members) for label, members in zip(QuintileLabel, partition(probs))}
    return QuintilePortfolios(week_index, buckets, dict(probs))


def select_target(quintiles: QuintilePortfolios) -> tuple[tuple[str, ...], bool]:
    """Members of the Very High bucket, plus the degenerate flag."""
    if quintiles.degenerate:
        return quintiles.members(QuintileLabel.Medium), True
    return quintiles.members(QuintileLabel.VeryHigh), False


@dataclass(frozen=True)
class AllocationDecision:
    week_index: int
    market_decision: Trend
    crypto_weight: float
    selected_assets: tuple[str, ...]
    per_asset_weight: float
    all_cash: bool = False

    @property
    def holdings(self) -> dict[str, float]:
        return {a: self.per_asset_weight for a in self.selected_assets}

    @property
    def cash(self) -> float:
        return 1.0 - math.fsum(self.holdings.values())


def allocate(market: TeamEnsemble, selected: Sequence[str]) -> AllocationDecision:
    """Full crypto exposure on a Rise call, half on Fall, split equally."""
    w = RISE_WEIGHT if market.decision is Trend.Rise else FALL_WEIGHT
    assets = tuple(selected)
    if not assets:
        return AllocationDecision(market.week_index, market.decision, 0.0, (), 0.0, all_cash=True)
    return AllocationDecision(market.week_index, market.decision, w, assets, w / len(assets))


@dataclass(frozen=True)
class PortfolioState:
    week_index: int
    value: float = 1.0
    weekly_return: float = 0.0
    holdings: dict[str, float] = field(default_factory=dict)


def zero_cost(previous: Mapping[str, float], target: Mapping[str, float]) -> float:
    return 0.0


def step(
    state: PortfolioState,
    decision: AllocationDecision,
    realized: Mapping[str, float],
    *,
    cost: Callable[[Mapping[str, float], Mapping[str, float]], float] = zero_cost,
) -> PortfolioState:
    """Apply one week: weighted asset returns, cash at zero, minus the cost hook."""
    holdings = decision.holdings
    missing = [a for a in holdings if realized.get(a) is None]
    if missing:
        raise KeyError(f"week {decision.week_index}: no realized return for {', '.join(missing)}")
    r = math.fsum(w * realized[a] for a, w in holdings.items()) - cost(state.holdings, holdings)
    return PortfolioState(decision.week_index, state.value * (1.0 + r), r, holdings)


def bucket_mean(assets: Iterable[str], realized: Mapping[str, float]) -> float:
    values = [realized[a] for a in assets]
    if not values:
        raise UndefinedMetricError("empty bucket")
    return math.fsum(values) / len(values)


def hml_return(quintiles: QuintilePortfolios, realized: Mapping[str, float]) -> float:
    """Equal-weight Very High bucket return minus the Very Low bucket return."""
    if quintiles.degenerate:
        raise UndefinedMetricError(f"week {quintiles.week_index}: degenerate quintiles")
    return bucket_mean(quintiles.members(QuintileLabel.VeryHigh), realized) - bucket_mean(
        quintiles.members(QuintileLabel.VeryLow), realized
    )


def ledger_row(decision: AllocationDecision, state: PortfolioState) -> dict[str, str]:
    return {
        "week": str(state.week_index),
        "decision": decision.market_decision.value,
        "w": repr(decision.crypto_weight),
        "holdings": ";".join(f"{a}:{w!r}" for a, w in sorted(state.holdings.items())),
        "weekly_return": repr(state.weekly_return),
        "value": repr(state.value),
    }


def ledger_csv(rows: Iterable[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def read_ledger(path: str | Path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_ledger(path: str | Path, rows: Iterable[Mapping[str, str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ledger_csv(rows), encoding="utf-8", newline="")
    return path
