"""Command-line entry point (``cryptoteam``).

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .agents import OpenAIFineTuneService, ProviderConfig, ScriptedFineTuneService
from .agents.log import JsonlLog
from .config import RunConfig, load_config
from .errors import ConfigError
from .factors import Trend
from .market_data import (
    BlockchainInfoProvider,
    CoinGeckoProvider,
    DataCache,
    HttpSource,
    IndexProvider,
    NewsFeedProvider,
    QueryWindow,
    SearchTrendsProvider,
    fetch_provider,
)
from .market_data.types import MARKET
from .portfolio import AllocationDecision, read_ledger
from .trading import execute_paper_trades

log = logging.getLogger("cryptoteam")


def _config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    if getattr(args, "run_id", None):
        config = replace(config, run_id=args.run_id)
    return config


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _config(args)
    cache = DataCache(config.data_dir)
    window = QueryWindow(config.data_start, config.test_end)
    fixtures = Path(config.fixtures_dir) if config.fixtures_dir else None
    if args.offline and fixtures is None:
        raise ConfigError("--offline needs fixtures_dir in the configuration")
    assets = list(config.assets)
    if fixtures is not None:
        if not assets and (fixtures / "coingecko").is_dir():
            assets = sorted(p.name for p in (fixtures / "coingecko").iterdir() if p.is_dir())
        sources = [
            (CoinGeckoProvider(fixture_dir=fixtures), assets),
            (BlockchainInfoProvider(fixture_dir=fixtures), [MARKET]),
            (SearchTrendsProvider(fixture_dir=fixtures), [MARKET]),
            (NewsFeedProvider(fixture_dir=fixtures), [MARKET]),
        ]
        if (fixtures / "index").is_dir():
            sources.append((IndexProvider(fixture_dir=fixtures), [MARKET]))
    else:
        if not assets:
            raise ConfigError("live ingestion needs an explicit asset list")
        gecko = HttpSource("https://api.coingecko.com/api/v3", os.environ.get("COINGECKO_API_KEY"))
        sources = [
            (CoinGeckoProvider(http=gecko), assets),
            (BlockchainInfoProvider(http=HttpSource("https://api.blockchain.info")), [MARKET]),
            (NewsFeedProvider(http=HttpSource("https://cointelegraph.com")), [MARKET]),
        ]
    for provider, subjects in sources:
        written = fetch_provider(provider, subjects, window, cache, parallelism=config.provider.parallelism)
        print(f"{provider.name}: {len(written)} series")
    return 0


def cmd_factors(args: argparse.Namespace) -> int:
    paths = pipeline.export_factors(_config(args))
    print(f"wrote {len(paths)} factor tables")
    return 0


def cmd_charts(args: argparse.Namespace) -> int:
    paths = pipeline.render_charts(_config(args))
    print(f"rendered {len(paths)} charts")
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    path, skipped = pipeline.annotate_training(_config(args))
    print(f"annotated examples: {path} ({len(skipped)} skipped)")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    for name, path in pipeline.export_datasets(_config(args)).items():
        print(f"{name}: {path}")
    return 0


def _finetune_service(config: RunConfig):
    if config.provider.kind == "scripted":
        return ScriptedFineTuneService()
    p = config.provider
    return OpenAIFineTuneService(ProviderConfig(endpoint=p.endpoint, api_key_env=p.api_key_env, timeout=p.timeout))


def cmd_finetune(args: argparse.Namespace) -> int:
    config = _config(args)
    out = pipeline.run_training_pipeline(
        config, export_only=args.export_only, service=None if args.export_only else _finetune_service(config)
    )
    for name, path in out.datasets.items():
        print(f"{name}: {path}")
    for role, ref in out.model_refs.items():
        print(f"{role} -> {ref}")
    return 0


def cmd_backtest(args: argparse.Namespace) -> int:
    config = _config(args)
    changes = {}
    if args.no_interteam or args.disable_agent:
        changes["ablation"] = {
            "no_interteam": args.no_interteam or config.ablation.no_interteam,
            "disabled_agents": list(config.ablation.disabled_agents) + list(args.disable_agent or []),
        }
    if changes:
        config = config.with_overrides(**changes)
    manifest = pipeline.run_backtest(config, max_weeks=args.max_weeks)
    print(f"run {manifest.run_id}: {manifest.status}, {len(manifest.completed_weeks)} weeks")
    if manifest.provenance_violations:
        print(f"look-ahead violations: {manifest.provenance_violations}", file=sys.stderr)
        return 2
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    for kind, path in pipeline.generate_report(_config(args)).items():
        print(f"{kind}: {path}")
    return 0


def cmd_trade(args: argparse.Namespace) -> int:
    if args.live:
        print("live trading is not implemented", file=sys.stderr)
        return 2
    config = _config(args)
    rows = read_ledger(config.run_dir / "ledger.csv")
    weeks = {r["week"]: r for r in JsonlLog(config.run_dir / "weeks.jsonl").read()}
    if not rows:
        raise ConfigError("no ledger; run the backtest first")
    idx = len(rows) - 1 if args.week is None else next((i for i, r in enumerate(rows) if int(r["week"]) == args.week), None)
    if idx is None:
        raise ConfigError(f"week {args.week} not in ledger")
    week = int(rows[idx]["week"])
    info = weeks[week]
    selected = tuple(info["selected"])
    w = float(info["crypto_weight"])
    decision = AllocationDecision(
        week, Trend(info["market_decision"]), w, selected, w / len(selected) if selected else 0.0, all_cash=not selected
    )
    current = {}
    if idx > 0:
        for item in rows[idx - 1]["holdings"].split(";"):
            if item:
                asset, weight = item.split(":")
                current[asset] = float(weight)
    report = execute_paper_trades(
        decision, current, config.run_dir, endpoint=args.endpoint, dry_run=args.dry_run or not args.endpoint
    )
    print(json.dumps({"week": week, "intents": len(report.intents), "sent": report.sent, "failed": report.failed}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cryptoteam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", "-c", help="YAML run configuration")
        p.add_argument("--run-id", help="override the run id")
        p.set_defaults(func=fn)
        return p

    p = add("ingest", cmd_ingest, "fetch raw series into the data cache")
    p.add_argument("--offline", action="store_true", help="read provider fixtures only; never touch the network")
    add("factors", cmd_factors, "export weekly factor tables")
    add("charts", cmd_charts, "render candlestick charts")
    add("annotate", cmd_annotate, "annotate training pairs with explanations")
    add("export-finetune", cmd_export, "write per-expert fine-tune datasets")
    p = add("finetune", cmd_finetune, "annotate, export and launch fine-tunes")
    p.add_argument("--export-only", action="store_true", help="write datasets without launching jobs")
    p = add("backtest", cmd_backtest, "run the weekly prediction loop on the test split")
    p.add_argument("--no-interteam", action="store_true", help="omit market context from crypto prompts")
    p.add_argument("--disable-agent", action="append", metavar="ROLE", help="drop an expert (repeatable)")
    p.add_argument("--max-weeks", type=int, help="stop after this many new weeks")
    add("report", cmd_report, "rebuild report files from run logs")
    p = add("trade", cmd_trade, "emit paper-trading order intents for a ledger week")
    p.add_argument("--dry-run", action="store_true", help="write intents only (default without --endpoint)")
    p.add_argument("--endpoint", help="paper-trading order endpoint")
    p.add_argument("--week", type=int, help="ledger week (default: last)")
    p.add_argument("--live", action="store_true", help="not implemented")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level boundary maps everything else to exit 2
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 2


if __name__ == "__main__":
    sys.exit(main())
