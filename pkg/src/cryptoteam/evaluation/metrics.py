"""Classification and return statistics."""

from __future__ import annotations

import math
import statistics
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from scipy import stats

from ..errors import InsufficientDataError, UndefinedMetricError
from ..factors import Trend

WEEKS_PER_YEAR = 52
SIGNIFICANCE_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts with Rise as the positive class."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_labels(cls, predicted: Iterable[Trend], actual: Iterable[Trend]) -> ConfusionCounts:
        tp = tn = fp = fn = 0
        for p, a in zip(predicted, actual, strict=True):
            if p is Trend.Rise:
                tp, fp = (tp + 1, fp) if a is Trend.Rise else (tp, fp + 1)
            else:
                fn, tn = (fn + 1, tn) if a is Trend.Rise else (fn, tn + 1)
        return cls(tp, tn, fp, fn)

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise UndefinedMetricError("accuracy of an empty confusion matrix")
    return (counts.tp + counts.tn) / counts.total


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation; 0 when any marginal is empty."""
    if counts.total == 0:
        raise UndefinedMetricError("MCC of an empty confusion matrix")
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def weekly_stats(returns: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation of weekly returns."""
    if len(returns) < 2:
        raise InsufficientDataError(f"need at least 2 returns, got {len(returns)}")
    return math.fsum(returns) / len(returns), statistics.pstdev(returns)


def cumulative(returns: Iterable[float]) -> float:
    value = 1.0
    for r in returns:
        value *= 1.0 + r
    return value - 1.0


def sharpe(mean: float, std: float, rf_weekly: float = 0.0, *, annualize: bool = True) -> float:
    """Excess mean over std, scaled by sqrt(52) when ``annualize``."""
    if std == 0:
        raise UndefinedMetricError("Sharpe ratio undefined for zero volatility")
    ratio = (mean - rf_weekly) / std
    return ratio * math.sqrt(WEEKS_PER_YEAR) if annualize else ratio


@dataclass(frozen=True)
class PerformanceReport:
    period: str
    mean: float
    std: float
    sharpe: float | None
    cumulative: float
    weeks: int

    def to_dict(self) -> dict[str, object]:
        return {
            "period": self.period,
            "mean": self.mean,
            "std": self.std,
            "sharpe": self.sharpe,
            "cumulative": self.cumulative,
            "weeks": self.weeks,
        }


def performance(period: str, returns: Sequence[float], rf_weekly: float = 0.0) -> PerformanceReport:
    mean, std = weekly_stats(returns)
    ratio = sharpe(mean, std, rf_weekly) if std > 0 else None
    return PerformanceReport(period, mean, std, ratio, cumulative(returns), len(returns))


@dataclass(frozen=True)
class RiseFallSplit:
    mean_rise: float | None
    mean_fall: float | None
    diff: float | None
    rise_weeks: int
    fall_weeks: int

    @property
    def defined(self) -> bool:
        return self.diff is not None


def rise_fall_split(decisions: Sequence[Trend], market_returns: Sequence[float]) -> RiseFallSplit:
    """Average realized market return by predicted class and their difference."""
    rise = [r for d, r in zip(decisions, market_returns, strict=True) if d is Trend.Rise]
    fall = [r for d, r in zip(decisions, market_returns, strict=True) if d is Trend.Fall]
    mean_rise = math.fsum(rise) / len(rise) if rise else None
    mean_fall = math.fsum(fall) / len(fall) if fall else None
    diff = mean_rise - mean_fall if rise and fall else None
    return RiseFallSplit(mean_rise, mean_fall, diff, len(rise), len(fall))


@dataclass(frozen=True)
class HmlSignificance:
    n: int
    mean: float
    sample_std: float
    t_stat: float
    p_value: float
    stars: str


def t_critical(alpha: float, df: int) -> float:
    """Two-sided Student-t critical value."""
    return float(stats.t.ppf(1.0 - alpha / 2.0, df))


def hml_significance(series: Sequence[float]) -> HmlSignificance:
    """One-sample two-sided t-test of the mean against zero, df = n - 1."""
    n = len(series)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    mean = math.fsum(series) / n
    sd = statistics.stdev(series)
    if sd == 0:
        raise UndefinedMetricError("t statistic undefined for zero variance")
    t_stat = mean / (sd / math.sqrt(n))
    stars = next((mark for alpha, mark in SIGNIFICANCE_LEVELS if abs(t_stat) > t_critical(alpha, n - 1)), "")
    p_value = float(2.0 * stats.t.sf(abs(t_stat), n - 1))
    return HmlSignificance(n, mean, sd, t_stat, p_value, stars)


def mean_disagreement(values: Mapping[int, float] | Sequence[float]) -> float:
    vals = list(values.values()) if isinstance(values, Mapping) else list(values)
    if not vals:
        raise InsufficientDataError("no disagreement values")
    return math.fsum(vals) / len(vals)
