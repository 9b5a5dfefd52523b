from __future__ import annotations

import json
import math

import pytest
from scipy import stats

from cryptoteam.agents import AgentRole, ScriptedProvider
from cryptoteam.errors import InsufficientDataError, UndefinedMetricError
from cryptoteam.evaluation import (
    BacktestSeries,
    JudgeItem,
    Regime,
    compile_report,
    detect_regimes,
    judge_explanations,
    parse_scores,
    regime_weeks,
    write_report,
)
from cryptoteam.evaluation.metrics import (
    ConfusionCounts,
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
from cryptoteam.factors import Trend
from cryptoteam.roles import RoleId

R, F = Trend.Rise, Trend.Fall


class TestClassification:
    def test_from_labels(self):
        c = ConfusionCounts.from_labels([R, R, F, F, R], [R, F, F, R, R])
        assert c.to_dict() == {"tp": 2, "tn": 1, "fp": 1, "fn": 1}
        assert accuracy(c) == 0.6
        # (2*1 - 1*1) / sqrt(3*3*2*2)
        assert mcc(c) == pytest.approx(1 / 6, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ConfusionCounts.from_labels([R], [R, F])

    def test_degenerate_marginal_is_zero(self):
        assert mcc(ConfusionCounts(tp=3, fp=2)) == 0.0

    def test_empty_raises(self):
        with pytest.raises(UndefinedMetricError):
            accuracy(ConfusionCounts())
        with pytest.raises(UndefinedMetricError):
            mcc(ConfusionCounts())

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1)


class TestReturnStats:
    def test_weekly_stats_population_std(self):
        mean, std = weekly_stats([0.1, -0.1, 0.2, 0.0])
        assert mean == pytest.approx(0.05)
        assert std == pytest.approx(math.sqrt(0.0125))

    def test_weekly_stats_needs_two(self):
        with pytest.raises(InsufficientDataError):
            weekly_stats([0.1])

    def test_sharpe(self):
        assert sharpe(0.01, 0.02) == pytest.approx(0.5 * math.sqrt(52))
        assert sharpe(0.01, 0.02, 0.005, annualize=False) == pytest.approx(0.25)
        with pytest.raises(UndefinedMetricError):
            sharpe(0.01, 0.0)

    def test_cumulative(self):
        assert cumulative([0.25, 0.125, 0.25, 1.0]) == 2.515625
        assert cumulative([]) == 0.0

    def test_performance_zero_std_has_no_sharpe(self):
        p = performance("All", [0.01, 0.01, 0.01])
        assert p.sharpe is None and p.weeks == 3

    def test_rise_fall_split(self):
        s = rise_fall_split([R, F, R, F], [0.1, -0.2, 0.3, 0.0])
        assert (s.mean_rise, s.mean_fall, s.rise_weeks, s.fall_weeks) == pytest.approx((0.2, -0.1, 2, 2))
        assert s.diff == pytest.approx(0.3)
        one_sided = rise_fall_split([R, R], [0.1, 0.2])
        assert one_sided.mean_fall is None and not one_sided.defined

    def test_mean_disagreement(self):
        assert mean_disagreement({1: 0.1, 2: 0.3}) == pytest.approx(0.2)
        with pytest.raises(InsufficientDataError):
            mean_disagreement([])


class TestSignificance:
    @pytest.mark.parametrize(
        "series",
        [[0.02, 0.01, 0.03, -0.01, 0.04, 0.02], [0.75, 0.5, 1.0, 1.5], [-0.1, 0.05, -0.02, 0.01, -0.03]],
    )
    def test_matches_scipy(self, series):
        sig = hml_significance(series)
        ref = stats.ttest_1samp(series, 0.0)
        assert sig.t_stat == pytest.approx(ref.statistic, rel=1e-12)
        assert sig.p_value == pytest.approx(ref.pvalue, rel=1e-9)
        assert sig.n == len(series)

    def test_stars_follow_critical_values(self):
        sig = hml_significance([0.75, 0.5, 1.0, 1.5])
        expected = "***" if abs(sig.t_stat) > t_critical(0.01, 3) else "**" if abs(sig.t_stat) > t_critical(0.05, 3) else "*"
        assert sig.stars == expected
        assert t_critical(0.05, 3) == pytest.approx(3.182446, abs=1e-6)

    def test_insignificant_has_no_stars(self):
        assert hml_significance([0.1, -0.1, 0.05, -0.04]).stars == ""

    def test_errors(self):
        with pytest.raises(InsufficientDataError):
            hml_significance([0.1])
        with pytest.raises(UndefinedMetricError):
            hml_significance([0.1, 0.1, 0.1])


class TestRegimes:
    def test_flat_series_is_neither(self):
        segs = detect_regimes([100, 101, 99, 100])
        assert [(s.start_week, s.end_week, s.kind) for s in segs] == [(0, 3, Regime.Neither)]

    def test_leading_neither_then_boom_then_bust(self):
        segs = detect_regimes([100, 95, 120, 130, 100], weeks=[10, 11, 12, 13, 14])
        assert [(s.start_week, s.end_week, s.kind) for s in segs] == [
            (10, 11, Regime.Neither),
            (11, 13, Regime.Boom),
            (13, 14, Regime.Bust),
        ]
        assert segs[1].change == pytest.approx(130 / 95 - 1)

    def test_contains_is_right_closed(self):
        seg = detect_regimes([100, 120, 90])[0]
        assert (seg.start_week, seg.end_week) == (0, 1)
        assert not seg.contains(0) and seg.contains(1) and not seg.contains(2)

    def test_regime_weeks(self):
        segs = detect_regimes([100, 95, 120, 130, 100])
        assert regime_weeks(segs, Regime.Boom) == [2, 3]
        assert regime_weeks(segs, Regime.Bust) == [4]

    @pytest.mark.parametrize("levels, weeks", [([100], None), ([100, 0], None), ([100, 110], [1])])
    def test_invalid(self, levels, weeks):
        with pytest.raises(ValueError):
            detect_regimes(levels, weeks)


GOOD = '{"professionalism": 0.8, "objectivity": 0.6, "clarity": 1, "consistency": 0.9, "rationale": 0.5}'


class TestJudge:
    def test_parse_with_surrounding_text(self):
        assert parse_scores(f"Here you go:\n{GOOD}\nThanks")["clarity"] == 1.0

    @pytest.mark.parametrize(
        "raw",
        ["no json", '{"professionalism": 0.8}', GOOD.replace("0.5", "1.5"), GOOD.replace("0.5", '"NaN"'), "{broken"],
    )
    def test_parse_rejects(self, raw):
        with pytest.raises(ValueError):
            parse_scores(raw)

    def test_judge_means_and_skips(self):
        other = GOOD.replace("0.8", "0.4")
        provider = ScriptedProvider(
            [
                {"role": "Judge", "subject": "r1", "week": "*", "text": GOOD},
                {"role": "Judge", "subject": "r2", "week": "*", "text": other},
                {"role": "Judge", "subject": "r3", "week": "*", "text": "unreadable"},
                {"role": "Judge", "subject": "r4", "week": "*", "text": GOOD},
            ]
        )
        items = [
            JudgeItem("r1", "ours", "a"),
            JudgeItem("r2", "ours", "b"),
            JudgeItem("r3", "ours", "c"),
            JudgeItem("r4", "base", "d"),
        ]
        result = judge_explanations(provider, AgentRole(RoleId.Judge, "judge"), items)
        assert [s.response_id for s in result.scores] == ["r1", "r2", "r4"]
        assert [sid for sid, _ in result.skipped] == ["r3"]
        assert list(result.means) == ["base", "ours"]
        assert result.means["ours"]["professionalism"] == pytest.approx(0.6)
        assert result.means["base"]["rationale"] == 0.5


def _series(**kw) -> BacktestSeries:
    base = dict(
        weeks=[1, 2, 3, 4],
        strategy_returns={"ours": [0.25, 0.125, 0.25, 1.0], "market": [0.1, -0.2, 0.1, 0.0]},
        market_decisions=[R, F, R, R],
        market_returns=[0.1, -0.2, 0.1, 0.0],
        hml=[0.75, 0.5, None, 1.5],
        regimes=detect_regimes([100, 120, 90, 100, 80]),
        classification={"market": ConfusionCounts(tp=2, tn=1, fp=1), "empty": ConfusionCounts()},
        disagreement={"crypto": [0.1, 0.3]},
    )
    base.update(kw)
    return BacktestSeries(**base)


class TestReport:
    def test_compile(self):
        rep = compile_report(_series())
        assert rep["cumulative"]["ours"] == 2.515625
        all_ours = rep["performance"]["ours"]["All"]
        assert all_ours["mean"] == pytest.approx(0.40625)
        # Boom covers week 1 only; Bust spans weeks 2..4 since the bounce to 100 is under 15%
        assert rep["performance"]["ours"]["Boom"] is None
        assert rep["performance"]["ours"]["Bust"]["weeks"] == 3
        assert rep["classification"]["market"]["accuracy"] == 0.75
        assert "mcc" not in rep["classification"]["empty"]
        assert rep["hml"]["weeks"] == 3 and rep["hml"]["undefined_weeks"] == 1
        assert rep["rise_fall"]["diff"] == pytest.approx(0.2 / 3 + 0.2)
        assert rep["disagreement"]["crypto"] == pytest.approx(0.2)

    def test_hml_error_recorded(self):
        rep = compile_report(_series(hml=[None, None, None, 0.1]))
        assert "error" in rep["hml"]

    def test_write_report(self, tmp_path):
        series = _series()
        rep = compile_report(series)
        out = write_report(tmp_path / "run", rep, series)
        assert json.loads(out["json"].read_text())["cumulative"]["ours"] == 2.515625
        md = out["markdown"].read_text()
        assert md.startswith("# Backtest report\n")
        assert "| Bust | ours |" in md and "| Boom | ours | n/a |" in md
        assert out["plot"].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_write_report_without_series_has_no_plot(self, tmp_path):
        out = write_report(tmp_path, compile_report(_series()))
        assert set(out) == {"json", "markdown"}
