"""Hand-built 13-week dataset with scripted agent answers and known outcomes.

Every asset trades flat within a week (open = high = low = close), so weekly
returns are exact ratios of the closes below. Backtest decision weeks are 9..12.
"""

from __future__ import annotations

import json
import math
from datetime import date, datetime, timedelta, timezone
from email.utils import format_datetime
from pathlib import Path

import yaml

ORIGIN = date(2024, 1, 1)
N_WEEKS = 13
ASSETS = ("AAA", "BBB", "CCC", "DDD", "EEE")
SUPPLY = {"AAA": 1000.0, "BBB": 500.0, "CCC": 100.0, "DDD": 10000.0, "EEE": 50.0}

# closes for weeks 8..12; weeks 0..7 repeat the week-8 close
TAIL = {
    "AAA": (64.0, 80.0, 60.0, 90.0, 45.0),
    "BBB": (32.0, 36.0, 27.0, 27.0, 54.0),
    "CCC": (128.0, 96.0, 120.0, 150.0, 75.0),
    "DDD": (16.0, 8.0, 12.0, 6.0, 9.0),
    "EEE": (256.0, 256.0, 320.0, 400.0, 200.0),
}
INDEX_TAIL = (1024.0, 1280.0, 960.0, 1200.0, 900.0)

DECISION_WEEKS = (9, 10, 11, 12)

# (label emitted, probability of that label) per market expert and decision week
MARKET_SCRIPT = {
    9: {"MarketFactor": ("Rise", 0.9), "News": ("Rise", 0.7)},
    10: {"MarketFactor": ("Fall", 0.8), "News": ("Rise", 0.6)},
    11: {"MarketFactor": ("Rise", 0.6), "News": ("Fall", 0.9)},
    12: {"MarketFactor": ("Rise", 0.95), "News": ("Rise", 0.55)},
}
# crypto-factor rise probabilities; None marks the garbage-then-no-logprob case
CF_PROBS = {
    9: {"AAA": 0.9, "BBB": 0.6, "CCC": 0.45, "DDD": 0.2, "EEE": 0.4},
    10: {"CCC": 0.85, "AAA": 0.1, "BBB": 0.3, "DDD": 0.55, "EEE": None},
    11: {"AAA": 0.8, "DDD": 0.15, "BBB": 0.45, "CCC": 0.6, "EEE": 0.7},
    12: {"BBB": 0.95, "CCC": 0.05, "AAA": 0.35, "DDD": 0.6, "EEE": 0.75},
}
FALLBACK_RISE = 0.75
TECH_RISE = 0.5

EXPECTED_LEDGER = [
    # week, selected, crypto weight, weekly return, value
    (9, ("AAA",), 1.0, 0.25, 1.25),
    (10, ("CCC",), 0.5, 0.125, 1.40625),
    (11, ("AAA",), 0.5, 0.25, 1.7578125),
    (12, ("BBB",), 1.0, 1.0, 3.515625),
]
EXPECTED_HML = (0.75, 0.5, 1.0, 1.5)


def closes(asset: str) -> list[float]:
    tail = TAIL[asset]
    return [tail[0]] * 8 + list(tail)


def index_closes() -> list[float]:
    return [INDEX_TAIL[0]] * 8 + list(INDEX_TAIL)


def weekly_return(asset: str, week: int) -> float:
    c = closes(asset)
    return c[week] / c[week - 1] - 1.0


def market_return(week: int) -> float:
    c = index_closes()
    return c[week] / c[week - 1] - 1.0


def cf_rise(week: int, asset: str) -> float:
    p = CF_PROBS[week][asset]
    return FALLBACK_RISE if p is None else p


def market_rise(week: int) -> tuple[float, float]:
    out = []
    for role in ("MarketFactor", "News"):
        label, p = MARKET_SCRIPT[week][role]
        out.append(p if label == "Rise" else 1.0 - p)
    return out[0], out[1]


def days() -> list[date]:
    return [ORIGIN + timedelta(days=i) for i in range(7 * N_WEEKS)]


def _ms(day: date) -> int:
    return int(datetime(day.year, day.month, day.day, tzinfo=timezone.utc).timestamp() * 1000)


def write_fixtures(root: Path) -> Path:
    """Provider payloads in the formats the fixture-mode providers read."""
    root = Path(root)
    for asset in ASSETS:
        base = root / "coingecko" / asset
        base.mkdir(parents=True, exist_ok=True)
        weekly = closes(asset)
        prices, caps, vols, ohlc = [], [], [], []
        for i, day in enumerate(days()):
            c = weekly[i // 7]
            ts = _ms(day)
            prices.append([ts, c])
            caps.append([ts, c * SUPPLY[asset]])
            vols.append([ts, 1000.0 + 10.0 * day.weekday()])
            ohlc.append([ts, c, c, c, c])
        (base / "market_chart.json").write_text(
            json.dumps({"prices": prices, "market_caps": caps, "total_volumes": vols}), encoding="utf-8"
        )
        (base / "ohlc.json").write_text(json.dumps(ohlc), encoding="utf-8")

    charts = {
        "my-wallet-n-users": lambda i: 1000.0 + 3.0 * i,
        "n-unique-addresses": lambda i: 500.0 + (i % 11) * 7.0,
        "n-transactions": lambda i: 300.0 + (i % 5) * 13.0,
        "n-payments": lambda i: 400.0 + (i % 9) * 5.0,
    }
    (root / "blockchain").mkdir(parents=True, exist_ok=True)
    for chart, fn in charts.items():
        values = [{"x": _ms(d) // 1000, "y": fn(i)} for i, d in enumerate(days())]
        (root / "blockchain" / f"{chart}.json").write_text(json.dumps({"values": values}), encoding="utf-8")

    (root / "trends").mkdir(parents=True, exist_ok=True)
    for term, fn in (("bitcoin", lambda i: 50.0 + (i % 7) * (i // 7)), ("cryptocurrency", lambda i: 40.0 + (i % 5) + i // 10)):
        values = [{"date": d.isoformat(), "value": fn(i)} for i, d in enumerate(days())]
        (root / "trends" / f"{term}.json").write_text(json.dumps({"values": values}), encoding="utf-8")

    items = []
    for w in range(N_WEEKS):
        for k in range(2):
            ts = datetime.combine(ORIGIN + timedelta(days=7 * w + 2 * k + 1), datetime.min.time(), tzinfo=timezone.utc)
            ts = ts.replace(hour=9)
            items.append(
                f"<item><title>Week {w} headline {k}</title><pubDate>{format_datetime(ts)}</pubDate></item>"
            )
    (root / "cointelegraph").mkdir(parents=True, exist_ok=True)
    (root / "cointelegraph" / "rss.xml").write_text(
        "<?xml version='1.0'?><rss version='2.0'><channel>" + "".join(items) + "</channel></rss>", encoding="utf-8"
    )

    (root / "index").mkdir(parents=True, exist_ok=True)
    levels = index_closes()
    values = [{"date": d.isoformat(), "close": levels[i // 7]} for i, d in enumerate(days())]
    (root / "index" / "MARKET.json").write_text(json.dumps({"values": values}), encoding="utf-8")
    return root


def _answer(label: str, subject: str) -> str:
    prefix = "Market trend" if subject == "MARKET" else "Price trend"
    return f"{prefix}: {label}\nExplanation: scripted view on {subject}."


def script_entries() -> list[dict]:
    entries: list[dict] = []
    for week, roles in MARKET_SCRIPT.items():
        for role, (label, p) in roles.items():
            entries.append(
                {"role": role, "subject": "MARKET", "week": week, "text": _answer(label, "MARKET"), "logprob": math.log(p)}
            )
    for week, probs in CF_PROBS.items():
        for asset, p in probs.items():
            if p is None:
                entries.append({"role": "CryptoFactor", "subject": asset, "week": week, "text": "I cannot tell."})
                entries.append({"role": "CryptoFactor", "subject": asset, "week": week, "text": _answer("Rise", asset)})
                continue
            label, lp = ("Rise", math.log(p)) if p > 0.5 else ("Fall", math.log(1.0 - p))
            entries.append({"role": "CryptoFactor", "subject": asset, "week": week, "text": _answer(label, asset), "logprob": lp})
    entries.append(
        {"role": "Technical", "subject": "*", "week": "*", "text": "Price trend: Fall\nExplanation: the chart is flat.", "logprob": math.log(TECH_RISE)}
    )
    entries.append(
        {
            "role": "Explainer",
            "subject": "*",
            "week": "*",
            "text": "Momentum and volume for {subject} in week {week} point to the stated outcome.",
        }
    )
    return entries


def write_script(path: Path, entries: list[dict] | None = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(e) + "\n" for e in (entries or script_entries())), encoding="utf-8")
    return path


def write_literature(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for stem in ("crypto-factor", "technical", "market-factor", "news"):
        (root / f"{stem}.txt").write_text(f"Reference notes for the {stem} expert.\n", encoding="utf-8")
    return root


def config_mapping(workdir: Path, *, training: bool = False, **extra) -> dict:
    d = {
        "data_dir": str(workdir / "data"),
        "runs_dir": str(workdir / "runs"),
        "literature_dir": str(workdir / "literature"),
        "fixtures_dir": str(workdir / "fixtures"),
        "data_start": "2024-01-01",
        "reference_end": "2024-01-21",
        "train_start": "2024-01-01",
        "train_end": "2024-03-03",
        "test_start": "2024-03-04",
        "test_end": "2024-03-31",
        "universe_size": 30,
        "benchmark_asset": "AAA",
        "provider": {"kind": "scripted", "scripts": [str(workdir / "script.jsonl")], "parallelism": 3},
    }
    if training:
        d.update(train_start="2024-01-29", train_end="2024-03-31", test_start="2024-04-01", test_end="2024-04-30")
    d.update(extra)
    return d


def build_workspace(workdir: Path, *, training: bool = False, ingest: bool = True, **extra) -> Path:
    """Write fixtures, scripts, literature and ``config.yaml``; optionally ingest."""
    workdir = Path(workdir)
    write_fixtures(workdir / "fixtures")
    write_script(workdir / "script.jsonl")
    write_literature(workdir / "literature")
    cfg = workdir / "config.yaml"
    cfg.write_text(yaml.safe_dump(config_mapping(workdir, training=training, **extra)), encoding="utf-8")
    if ingest:
        from cryptoteam.cli import main

        assert main(["ingest", "-c", str(cfg)]) == 0
    return cfg
