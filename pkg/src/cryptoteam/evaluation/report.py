"""Run report: JSON metrics, a Markdown summary and cumulative-return plots."""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InsufficientDataError, UndefinedMetricError
from ..factors import Trend
from .metrics import (
    ConfusionCounts,
    accuracy,
    cumulative,
    hml_significance,
    mcc,
    performance,
    rise_fall_split,
    sharpe,
    weekly_stats,
)
from .regimes import Regime, RegimeSegment

PERIODS = ("All", "Boom", "Bust")


@dataclass
class BacktestSeries:
    """Week-aligned inputs to the report (``weeks`` are decision weeks)."""

    weeks: list[int]
    strategy_returns: dict[str, list[float]]
    market_decisions: list[Trend]
    market_returns: list[float]
    hml: list[float | None]
    regimes: list[RegimeSegment]
    classification: dict[str, ConfusionCounts]
    disagreement: dict[str, list[float]] = field(default_factory=dict)
    rf_weekly: float = 0.0
    flags: dict[str, Any] = field(default_factory=dict)


def _period_weeks(series: BacktestSeries, period: str) -> list[int]:
    if period == "All":
        return list(range(len(series.weeks)))
    kind = Regime(period)
    return [i for i, w in enumerate(series.weeks) if any(s.kind is kind and s.contains(w) for s in series.regimes)]


def _performance(returns: Sequence[float], idx: Sequence[int], period: str, rf: float) -> dict[str, Any] | None:
    picked = [returns[i] for i in idx]
    try:
        return performance(period, picked, rf).to_dict()
    except InsufficientDataError:
        return None


def _hml(series: Sequence[float | None]) -> dict[str, Any]:
    values = [v for v in series if v is not None]
    out: dict[str, Any] = {"weeks": len(values), "undefined_weeks": len(series) - len(values)}
    try:
        mean, std = weekly_stats(values)
        sig = hml_significance(values)
    except (InsufficientDataError, UndefinedMetricError) as exc:
        out["error"] = str(exc)
        return out
    out.update(
        mean=mean,
        std=std,
        sharpe_weekly=sharpe(mean, std, annualize=False) if std else None,
        sharpe_annualized=sharpe(mean, std) if std else None,
        t_stat=sig.t_stat,
        p_value=sig.p_value,
        stars=sig.stars,
    )
    return out


def compile_report(series: BacktestSeries) -> dict[str, Any]:
    perf = {
        name: {p: _performance(rets, _period_weeks(series, p), p, series.rf_weekly) for p in PERIODS}
        for name, rets in series.strategy_returns.items()
    }
    classification = {}
    for name, counts in sorted(series.classification.items()):
        entry: dict[str, Any] = counts.to_dict()
        if counts.total:
            entry.update(accuracy=accuracy(counts), mcc=mcc(counts))
        classification[name] = entry
    split = rise_fall_split(series.market_decisions, series.market_returns)
    return {
        "weeks": list(series.weeks),
        "performance": perf,
        "cumulative": {name: cumulative(r) for name, r in series.strategy_returns.items()},
        "classification": classification,
        "rise_fall": {
            "mean_rise": split.mean_rise,
            "mean_fall": split.mean_fall,
            "diff": split.diff,
            "rise_weeks": split.rise_weeks,
            "fall_weeks": split.fall_weeks,
        },
        "hml": _hml(series.hml),
        "regimes": [s.to_dict() for s in series.regimes],
        "disagreement": {
            team: (math.fsum(v) / len(v) if v else None) for team, v in sorted(series.disagreement.items())
        },
        "flags": series.flags,
    }


def _fmt(value: Any, digits: int = 4) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_markdown(report: Mapping[str, Any]) -> str:
    lines = ["# Backtest report", ""]
    lines += ["## Classification", "", "| Model | Accuracy | MCC | n |", "|---|---|---|---|"]
    for name, c in report["classification"].items():
        n = c["tp"] + c["tn"] + c["fp"] + c["fn"]
        lines.append(f"| {name} | {_fmt(c.get('accuracy'))} | {_fmt(c.get('mcc'))} | {n} |")
    rf = report["rise_fall"]
    lines += [
        "",
        "## Market return by predicted trend",
        "",
        "| Rise | Fall | Diff |",
        "|---|---|---|",
        f"| {_fmt(rf['mean_rise'])} | {_fmt(rf['mean_fall'])} | {_fmt(rf['diff'])} |",
        "",
        "## Portfolio performance",
        "",
        "| Period | Portfolio | Mean | Std | Sharpe | Cumulative |",
        "|---|---|---|---|---|---|",
    ]
    for period in PERIODS:
        for name, by_period in report["performance"].items():
            p = by_period[period]
            if p is None:
                lines.append(f"| {period} | {name} | n/a | n/a | n/a | n/a |")
            else:
                lines.append(
                    f"| {period} | {name} | {_fmt(p['mean'])} | {_fmt(p['std'])} | {_fmt(p['sharpe'])} | {_fmt(p['cumulative'])} |"
                )
    h = report["hml"]
    lines += [
        "",
        "## High minus low",
        "",
        "| Mean | Std | Sharpe (weekly) | Sharpe (annualized) | t | |",
        "|---|---|---|---|---|---|",
        f"| {_fmt(h.get('mean'))} | {_fmt(h.get('std'))} | {_fmt(h.get('sharpe_weekly'))} | "
        f"{_fmt(h.get('sharpe_annualized'))} | {_fmt(h.get('t_stat'), 3)} | {h.get('stars', '')} |",
        "",
        "## Regimes",
        "",
    ]
    lines += [f"- {r['kind']}: weeks {r['start_week']} to {r['end_week']} ({r['change']:+.2%})" for r in report["regimes"]]
    if report["disagreement"]:
        lines += ["", "## Mean disagreement", ""]
        lines += [f"- {team}: {_fmt(v)}" for team, v in report["disagreement"].items()]
    return "\n".join(lines) + "\n"


def plot_cumulative(weeks: Sequence[int], strategy_returns: Mapping[str, Sequence[float]], path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4.5), dpi=100)
    for name, rets in strategy_returns.items():
        value, curve = 1.0, []
        for r in rets:
            value *= 1.0 + r
            curve.append(value - 1.0)
        ax.plot(list(weeks), curve, label=name)
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.set_xlabel("week")
    ax.set_ylabel("cumulative return")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def write_report(run_dir: str | Path, report: Mapping[str, Any], series: BacktestSeries | None = None) -> dict[str, Path]:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    out = {
        "json": run_dir / "report.json",
        "markdown": run_dir / "report.md",
    }
    out["json"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    out["markdown"].write_text(render_markdown(report), encoding="utf-8")
    if series is not None and series.weeks:
        out["plot"] = plot_cumulative(series.weeks, series.strategy_returns, run_dir / "cumulative.png")
    return out
