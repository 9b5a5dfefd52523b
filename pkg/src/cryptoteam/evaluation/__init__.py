"""Metrics, regimes, explanation judging and run reports."""

from .judge import CRITERIA, ExplainScore, JudgeItem, JudgeResult, judge_explanations, parse_scores
from .metrics import (
    WEEKS_PER_YEAR,
    ConfusionCounts,
    HmlSignificance,
    PerformanceReport,
    RiseFallSplit,
    accuracy,
    cumulative,
    hml_significance,
    mcc,
    mean_disagreement,
    performance,
    rise_fall_split,
    sharpe,
    t_critical,
    weekly_stats,
)
from .regimes import THRESHOLD, Regime, RegimeSegment, detect_regimes, regime_weeks
from .report import BacktestSeries, compile_report, plot_cumulative, render_markdown, write_report

__all__ = [
    "CRITERIA",
    "THRESHOLD",
    "WEEKS_PER_YEAR",
    "BacktestSeries",
    "ConfusionCounts",
    "ExplainScore",
    "HmlSignificance",
    "JudgeItem",
    "JudgeResult",
    "PerformanceReport",
    "Regime",
    "RegimeSegment",
    "RiseFallSplit",
    "accuracy",
    "compile_report",
    "cumulative",
    "detect_regimes",
    "hml_significance",
    "judge_explanations",
    "mcc",
    "mean_disagreement",
    "parse_scores",
    "performance",
    "plot_cumulative",
    "regime_weeks",
    "render_markdown",
    "rise_fall_split",
    "sharpe",
    "t_critical",
    "weekly_stats",
    "write_report",
]
