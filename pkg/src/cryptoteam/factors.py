"""Crypto-specific and market factors, quintile categorization and ground truth.

Field order everywhere (vectors, CSV columns, prompt text) follows the
factor table: MCAP, PRC, MAXDPRC, MOM 1,0 ... STDPRCVOL for crypto factors
and ATTN BTC, ATTN CRYPTO, UNI ADDR, ACT ADDR, TXN, PAY for market factors.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, NoLabelError
from .market_data.types import MarketWeekRecord, WeeklyAssetRecord
from .quintiles import QuintileLabel, partition

CRYPTO_FIELDS = ("mcap", "prc", "maxdprc", "mom_1_0", "mom_2_0", "mom_3_0", "mom_4_0", "mom_4_1", "prcvol", "stdprcvol")
MARKET_FIELDS = ("attn_btc", "attn_crypto", "uni_addr", "act_addr", "txn", "pay")

DISPLAY_NAMES = {
    "mcap": "MCAP",
    "prc": "PRC",
    "maxdprc": "MAXDPRC",
    "mom_1_0": "MOM 1,0",
    "mom_2_0": "MOM 2,0",
    "mom_3_0": "MOM 3,0",
    "mom_4_0": "MOM 4,0",
    "mom_4_1": "MOM 4,1",
    "prcvol": "PRCVOL",
    "stdprcvol": "STDPRCVOL",
    "attn_btc": "ATTN BTC",
    "attn_crypto": "ATTN CRYPTO",
    "uni_addr": "UNI ADDR",
    "act_addr": "ACT ADDR",
    "txn": "TXN",
    "pay": "PAY",
}


class DegenerateInputWarning(UserWarning):
    """Computation fell back to its declared degenerate rule."""


class Trend(str, Enum):
    Rise = "Rise"
    Fall = "Fall"

    @classmethod
    def parse(cls, text: str) -> Trend:
        key = text.strip().lower()
        if key == "rise":
            return cls.Rise
        if key == "fall":
            return cls.Fall
        raise ValueError(f"unknown trend label {text!r}")


@dataclass(frozen=True)
class CryptoFactorVector:
    asset_id: str
    week_index: int
    mcap: float | None = None
    prc: float | None = None
    maxdprc: float | None = None
    mom_1_0: float | None = None
    mom_2_0: float | None = None
    mom_3_0: float | None = None
    mom_4_0: float | None = None
    mom_4_1: float | None = None
    prcvol: float | None = None
    stdprcvol: float | None = None
    missing: dict[str, str] = field(default_factory=dict, compare=False)

    def values(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in CRYPTO_FIELDS}

    @property
    def available(self) -> dict[str, bool]:
        return {name: getattr(self, name) is not None for name in CRYPTO_FIELDS}


@dataclass(frozen=True)
class MarketFactorVector:
    week_index: int
    attn_btc: float | None = None
    attn_crypto: float | None = None
    uni_addr: float | None = None
    act_addr: float | None = None
    txn: float | None = None
    pay: float | None = None
    missing: dict[str, str] = field(default_factory=dict, compare=False)
    degenerate: tuple[str, ...] = ()

    def values(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in MARKET_FIELDS}


@dataclass(frozen=True)
class GroundTruthTrend:
    subject: str
    week_index: int
    label: Trend


def _safe_log(value: float | None, name: str, missing: dict[str, str]) -> float | None:
    if value is None:
        missing[name] = "no data"
        return None
    if not value > 0:
        missing[name] = f"non-positive log argument {value!r}"
        return None
    return math.log(value)


def compute_crypto_factors(records: Mapping[int, WeeklyAssetRecord], week_index: int) -> CryptoFactorVector:
    """Factor vector for the formation week ``week_index`` of one asset.

    ``records`` maps week index to that asset's weekly record. Fields that
    cannot be computed (short history, non-positive log argument, zero
    dispersion) are ``None`` with the reason in ``missing``.
    """
    current = records.get(week_index)
    if current is None:
        raise InsufficientDataError(f"no record for week {week_index}")
    missing: dict[str, str] = {}
    out: dict[str, float | None] = {}

    out["mcap"] = _safe_log(current.market_cap_last_day, "mcap", missing)
    out["prc"] = _safe_log(current.close, "prc", missing)
    out["maxdprc"] = max(c.close for c in current.daily_candles)

    def close_at(k: int) -> float | None:
        rec = records.get(week_index - k)
        return rec.close if rec is not None else None

    for k in (1, 2, 3, 4):
        name = f"mom_{k}_0"
        past = close_at(k)
        if past is None or past <= 0:
            missing[name] = f"needs week t-{k}"
            out[name] = None
        else:
            out[name] = current.close / past - 1.0
    c1, c4 = close_at(1), close_at(4)
    if c1 is None or c4 is None or c4 <= 0:
        missing["mom_4_1"] = "needs weeks t-1 and t-4"
        out["mom_4_1"] = None
    else:
        out["mom_4_1"] = c1 / c4 - 1.0

    dollar_volume = [c.volume * c.close for c in current.daily_candles]
    out["prcvol"] = _safe_log(math.fsum(dollar_volume) / len(dollar_volume), "prcvol", missing)
    spread = statistics.pstdev(dollar_volume)
    if spread == 0:
        missing["stdprcvol"] = "zero dispersion"
        out["stdprcvol"] = None
    else:
        out["stdprcvol"] = math.log(spread)
    return CryptoFactorVector(current.asset_id, week_index, **out, missing=missing)


def demeaned_search(history: Mapping[int, MarketWeekRecord], attr: str, week_index: int) -> float | None:
    """Search index minus its average over the previous four weeks."""
    values = []
    for w in range(week_index - 4, week_index + 1):
        rec = history.get(w)
        value = getattr(rec, attr) if rec is not None else None
        if value is None:
            return None
        values.append(value)
    return values[-1] - math.fsum(values[:-1]) / 4.0


def standardize(value: float, reference: Sequence[float]) -> tuple[float, bool]:
    """Z-score against a reference sample (population std).

    Returns ``(z, degenerate)``; a zero-variance reference yields ``(0.0, True)``.
    """
    if not reference:
        raise InsufficientDataError("empty standardization window")
    mean = math.fsum(reference) / len(reference)
    std = statistics.pstdev(reference)
    if std == 0:
        return 0.0, True
    return (value - mean) / std, False


_ONCHAIN = {"uni_addr": "wallet_count", "act_addr": "active_addresses", "txn": "tx_count", "pay": "payments_count"}
_SEARCH = {"attn_btc": "search_index_btc", "attn_crypto": "search_index_crypto"}


def compute_market_factors(
    history: Mapping[int, MarketWeekRecord],
    week_index: int,
    reference_weeks: Iterable[int],
) -> MarketFactorVector:
    """Market factor vector for ``week_index``.

    Attention factors are the demeaned search index standardized over the
    demeaned values of ``reference_weeks``; on-chain factors are one-week
    growth rates.
    """
    reference_weeks = list(reference_weeks)
    missing: dict[str, str] = {}
    degenerate: list[str] = []
    out: dict[str, float | None] = {}
    for name, attr in _SEARCH.items():
        value = demeaned_search(history, attr, week_index)
        if value is None:
            missing[name] = "needs five weeks of search data"
            out[name] = None
            continue
        ref = [d for w in reference_weeks if (d := demeaned_search(history, attr, w)) is not None]
        if not ref:
            missing[name] = "empty reference window"
            out[name] = None
            continue
        out[name], flat = standardize(value, ref)
        if flat:
            degenerate.append(name)
    for name, attr in _ONCHAIN.items():
        cur, prev = history.get(week_index), history.get(week_index - 1)
        a = getattr(cur, attr) if cur is not None else None
        b = getattr(prev, attr) if prev is not None else None
        if a is None or b is None or b == 0:
            missing[name] = "needs weeks t and t-1"
            out[name] = None
        else:
            out[name] = a / b - 1.0
    return MarketFactorVector(week_index, **out, missing=missing, degenerate=tuple(degenerate))


def quintile_categorize_cross_sectional(values: Mapping[str, float]) -> dict[str, QuintileLabel]:
    """Label each asset by its cross-sectional quintile (ties by asset id).

    Fewer than five values: everything is ``Medium`` and a
    ``DegenerateInputWarning`` is emitted.
    """
    if len(values) < 5:
        warnings.warn(f"only {len(values)} values; labeling all Medium", DegenerateInputWarning, stacklevel=2)
        return {k: QuintileLabel.Medium for k in values}
    out = {}
    for label, bucket in zip(QuintileLabel, partition(values)):
        for key in bucket:
            out[key] = label
    return out


def quintile_cutoffs(reference: Sequence[float]) -> tuple[float, float, float, float]:
    if len(reference) < 5:
        raise InsufficientDataError(f"reference series needs at least 5 values, got {len(reference)}")
    c = np.percentile(np.asarray(reference, dtype=float), [20, 40, 60, 80])
    return tuple(float(x) for x in c)  # type: ignore[return-value]


def quintile_categorize_fixed_reference(value: float, reference: Sequence[float]) -> QuintileLabel:
    """Label against the 20/40/60/80th percentiles of ``reference``; intervals are right-closed."""
    if value is None or math.isnan(value):
        raise ValueError("cannot categorize NaN")
    for label, cutoff in zip(QuintileLabel, quintile_cutoffs(reference)):
        if value <= cutoff:
            return label
    return QuintileLabel.VeryHigh


def label_crypto_factors(
    vectors: Mapping[str, CryptoFactorVector],
) -> dict[str, dict[str, QuintileLabel]]:
    """Cross-sectional labels per field; missing fields get no label."""
    labels: dict[str, dict[str, QuintileLabel]] = {asset: {} for asset in vectors}
    for name in CRYPTO_FIELDS:
        column = {a: v for a, vec in vectors.items() if (v := getattr(vec, name)) is not None}
        if not column:
            continue
        for asset, label in quintile_categorize_cross_sectional(column).items():
            labels[asset][name] = label
    return labels


def label_market_factors(
    vector: MarketFactorVector, reference: Mapping[str, Sequence[float]]
) -> dict[str, QuintileLabel]:
    """Labels for a market vector against per-field reference samples."""
    out = {}
    for name, value in vector.values().items():
        ref = reference.get(name, ())
        if value is not None and len(ref) >= 5:
            out[name] = quintile_categorize_fixed_reference(value, ref)
    return out


def market_factor_reference(
    history: Mapping[int, MarketWeekRecord], reference_weeks: Iterable[int]
) -> dict[str, list[float]]:
    """Factor values over the reference window, used as cutoff samples."""
    reference_weeks = list(reference_weeks)
    ref: dict[str, list[float]] = {name: [] for name in MARKET_FIELDS}
    for w in reference_weeks:
        vec = compute_market_factors(history, w, reference_weeks)
        for name, value in vec.values().items():
            if value is not None:
                ref[name].append(value)
    return ref


def compute_ground_truth(subject: str, week_index: int, returns: Mapping[int, float | None]) -> GroundTruthTrend:
    """Rise iff the return of week ``week_index + 1`` is strictly positive."""
    nxt = returns.get(week_index + 1)
    if nxt is None:
        raise NoLabelError(f"{subject}: no return for week {week_index + 1}")
    return GroundTruthTrend(subject, week_index, Trend.Rise if nxt > 0 else Trend.Fall)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def crypto_factor_table(vectors: Iterable[CryptoFactorVector]) -> str:
    rows = sorted(vectors, key=lambda v: v.asset_id)
    return _csv_text(("asset_id", *CRYPTO_FIELDS), ([v.asset_id, *v.values().values()] for v in rows))


def market_factor_table(vectors: Iterable[MarketFactorVector]) -> str:
    rows = sorted(vectors, key=lambda v: v.week_index)
    return _csv_text(("week_index", *MARKET_FIELDS), ([v.week_index, *v.values().values()] for v in rows))


def export_factor_tables(
    out_dir: str | Path,
    crypto: Mapping[int, Iterable[CryptoFactorVector]],
    market: Iterable[MarketFactorVector],
) -> list[Path]:
    """Write ``factors/crypto_{week}.csv`` per week and ``factors/market.csv``."""
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    paths = []
    for week, vectors in sorted(crypto.items()):
        path = base / f"crypto_{week}.csv"
        path.write_text(crypto_factor_table(vectors), encoding="utf-8", newline="")
        paths.append(path)
    path = base / "market.csv"
    path.write_text(market_factor_table(market), encoding="utf-8", newline="")
    paths.append(path)
    return paths

