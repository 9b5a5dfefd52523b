"""End-to-end orchestration: inputs, training datasets, weekly backtest and report."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from . import __version__
from .agents import (
    AgentPrediction,
    AgentRole,
    ChatProvider,
    CompletionRequest,
    FineTuneService,
    JsonlLog,
    OpenAIChatProvider,
    PredictionLog,
    ProviderConfig,
    RoleBindings,
    ScriptedProvider,
    SkippedExample,
    annotate_batch,
    launch_finetune,
    predict,
)
from .agents.log import dumps
from .charts import WINDOW_DAYS, ChartIndex, ChartSpec, render_chart
from .collaboration import SharedMemory, TeamEnsemble, build_interteam_context, intrateam_ensemble
from .config import RunConfig, dump_config
from .errors import ConfigError, CryptoTeamError, InsufficientDataError, StageError, UndefinedMetricError
from .evaluation import BacktestSeries, ConfusionCounts, compile_report, detect_regimes, write_report
from .factors import (
    Trend,
    compute_crypto_factors,
    compute_market_factors,
    export_factor_tables,
    label_crypto_factors,
    label_market_factors,
    market_factor_reference,
)
from .market_data import MARKET, DataCache, MarketDataStore
from .portfolio import (
    PortfolioState,
    allocate,
    form_quintiles,
    hml_return,
    ledger_row,
    read_ledger,
    select_target,
    step,
    write_ledger,
)
from .prompts import (
    CHART_INFO,
    Modality,
    TrainingExample,
    build_finetune_record,
    export_finetune_dataset,
    factors_to_text,
    load_literature,
    news_to_text,
    prediction_messages,
    template_version,
)
from .roles import CRYPTO_TEAM, EXPERT_ROLES, MARKET_TEAM, RoleId

log = logging.getLogger(__name__)

Provenance = tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class PromptInput:
    subject: str
    role: RoleId
    info: str
    provenance: Provenance
    image_ref: str | None = None


def open_store(config: RunConfig) -> MarketDataStore:
    return MarketDataStore(
        DataCache(config.data_dir),
        config.data_start,
        config.week_boundary,
        universe_size=config.universe_size,
        exclude_stablecoins=config.exclude_stablecoins,
    )


def make_provider(config: RunConfig) -> ChatProvider:
    p = config.provider
    if p.kind == "scripted":
        if not p.scripts:
            raise ConfigError("scripted provider needs at least one script file")
        return ScriptedProvider.from_jsonl(*p.scripts)
    return OpenAIChatProvider(
        ProviderConfig(
            endpoint=p.endpoint,
            api_key_env=p.api_key_env,
            timeout=p.timeout,
            max_retries=p.max_retries,
            parallelism=p.parallelism,
        )
    )


def bindings_path(config: RunConfig) -> Path:
    return Path(config.runs_dir) / "bindings.json"


def agent_roles(config: RunConfig) -> dict[RoleId, AgentRole]:
    defaults = {r: config.model_for(r) for r in RoleId}
    return RoleBindings(bindings_path(config)).roles(defaults)


class InputBuilder:
    """Prompt inputs for a formation week, each tagged with the (source, week) data it used."""

    def __init__(self, config: RunConfig, store: MarketDataStore) -> None:
        self.config = config
        self.store = store
        self.charts = ChartIndex(Path(config.data_dir) / "charts")

    @cached_property
    def reference_weeks(self) -> list[int]:
        return [w for w in sorted(self.store.market_weeks) if self.store.week_end(w) <= self.config.reference_end]

    @cached_property
    def reference(self) -> dict[str, list[float]]:
        return market_factor_reference(self.store.market_weeks, self.reference_weeks)

    def members(self, week: int) -> tuple[str, ...]:
        return tuple(sorted(self.store.universe(week).members))

    def crypto_factors(self, week: int) -> dict[str, PromptInput]:
        vectors = {}
        for asset in self.members(week):
            try:
                vectors[asset] = compute_crypto_factors(self.store.weekly(asset), week)
            except InsufficientDataError:
                continue
        labels = label_crypto_factors(vectors)
        out = {}
        for asset, vec in vectors.items():
            prov = tuple((f"ohlcv:{asset}", w) for w in range(week - 4, week + 1) if self.store.record(asset, w))
            out[asset] = PromptInput(asset, RoleId.CryptoFactor, factors_to_text(vec, labels[asset]), prov)
        return out

    def chart(self, asset: str, week: int) -> PromptInput | None:
        end = self.store.week_end(week)
        candles = self.store.daily_window(asset, end, 2 * WINDOW_DAYS - 1)
        window, history = candles[-WINDOW_DAYS:], [c.close for c in candles[:-WINDOW_DAYS]]
        if len(window) < WINDOW_DAYS:
            return None
        try:
            rendered = render_chart(ChartSpec(asset, end), window, ma_history=history)
        except ValueError as exc:
            log.info("no chart for %s week %d: %s", asset, week, exc)
            return None
        path = self.charts.write(asset, week, rendered)
        self.charts.save()
        prov = tuple(sorted({(f"ohlcv:{asset}", self.store.week_of(c.date)) for c in candles}))
        return PromptInput(asset, RoleId.Technical, CHART_INFO.format(crypto=asset), prov, str(path))

    def market_factors(self, week: int) -> PromptInput:
        if self.reference_weeks and max(self.reference_weeks) >= week:
            raise ConfigError(f"market reference window overlaps formation week {week}")
        vec = compute_market_factors(self.store.market_weeks, week, self.reference_weeks)
        labels = label_market_factors(vec, self.reference)
        prov = [("search", w) for w in range(week - 4, week + 1)] + [("onchain", week - 1), ("onchain", week)]
        if self.reference_weeks:
            prov.append(("reference", max(self.reference_weeks)))
        return PromptInput(MARKET, RoleId.MarketFactor, factors_to_text(vec, labels), tuple(sorted(prov)))

    def news(self, week: int) -> PromptInput:
        rec = self.store.market_week(week)
        headlines = rec.news if rec is not None else ()
        return PromptInput(MARKET, RoleId.News, news_to_text(headlines), (("news", week),))


def prediction_request(inp: PromptInput, decision_week: int) -> CompletionRequest:
    system, user = prediction_messages(inp.subject, inp.info)
    return CompletionRequest(
        system,
        user,
        image_ref=inp.image_ref,
        subject=inp.subject,
        week_index=decision_week,
        provenance=inp.provenance,
    )


def audit_provenance(records: Iterable[dict[str, Any]]) -> list[str]:
    """Prompt records that reference data from the decision week or later."""
    violations = []
    for r in records:
        for source, week in r["provenance"]:
            if week > r["week"] - 1:
                violations.append(f"{r['role']} {r['subject']} week {r['week']}: {source}@{week}")
    return violations


@dataclass
class RunManifest:
    run_id: str
    config_hash: str
    input_hashes: dict[str, str]
    module_versions: dict[str, str]
    stages: dict[str, str] = field(default_factory=dict)
    completed_weeks: list[int] = field(default_factory=list)
    status: str = "running"
    provenance_violations: int = 0

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> RunManifest:
        return cls(**json.loads(path.read_text(encoding="utf-8")))


def _truncate_jsonl(path: Path, keep: Callable[[dict[str, Any]], bool]) -> None:
    if not path.exists():
        return
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    kept = [line for line in lines if keep(json.loads(line))]
    if len(kept) != len(lines):
        path.write_text("".join(line + "\n" for line in kept), encoding="utf-8")


def backtest_weeks(config: RunConfig, store: MarketDataStore) -> list[int]:
    return [
        w
        for w in store.weeks
        if store.week_start(w) >= config.test_start and store.week_end(w) <= config.test_end
    ]


def truth(value: float | None) -> str | None:
    if value is None:
        return None
    return Trend.Rise.value if value > 0 else Trend.Fall.value


class Backtest:
    """Weekly prediction loop for the test split.

    Decision week ``t`` uses formation data from week ``t - 1`` and is
    settled with the realized returns of week ``t``.
    """

    def __init__(self, config: RunConfig, provider: ChatProvider | None = None, store: MarketDataStore | None = None):
        self.config = config
        self.store = store or open_store(config)
        self.provider = provider or make_provider(config)
        self.roles = agent_roles(config)
        self.inputs = InputBuilder(config, self.store)
        self.run_dir = config.run_dir
        self.predictions = PredictionLog(self.run_dir / "predictions.jsonl")
        self.ensembles = JsonlLog(self.run_dir / "ensembles.jsonl")
        self.week_log = JsonlLog(self.run_dir / "weeks.jsonl")
        self.prompt_log = JsonlLog(self.run_dir / "prompts.jsonl")
        self.manifest_path = self.run_dir / "manifest.json"

    def _enabled(self, roles: Sequence[RoleId]) -> list[RoleId]:
        return [r for r in roles if self.config.agent_enabled(r)]

    def _predict_all(self, tasks: Sequence[tuple[RoleId, CompletionRequest]]) -> list[AgentPrediction]:
        def one(task: tuple[RoleId, CompletionRequest]) -> AgentPrediction:
            role_id, req = task
            return predict(self.provider, self.roles[role_id], req)

        if len(tasks) <= 1:
            return [one(t) for t in tasks]
        with ThreadPoolExecutor(max_workers=self.config.provider.parallelism) as pool:
            # map keeps task order, so logging order is independent of completion order
            return list(pool.map(one, tasks))

    @staticmethod
    def _prompt_record(role: RoleId, req: CompletionRequest) -> dict[str, Any]:
        return {
            "week": req.week_index,
            "role": role.value,
            "subject": req.subject,
            "provenance": [list(p) for p in req.provenance],
            "flags": list(req.flags),
            "image_ref": req.image_ref,
            "user": req.user,
        }

    def run_week(self, t: int, state: PortfolioState) -> tuple[PortfolioState, dict[str, str]]:
        f = t - 1
        prompts: list[dict[str, Any]] = []

        # market team, logged before any crypto-team request is built
        try:
            market_inputs = {RoleId.MarketFactor: self.inputs.market_factors(f), RoleId.News: self.inputs.news(f)}
            tasks = [(r, prediction_request(market_inputs[r], t)) for r in self._enabled(MARKET_TEAM)]
            prompts += [self._prompt_record(r, q) for r, q in tasks]
            market_preds = self._predict_all(tasks)
            self.predictions.record_all(market_preds)
        except CryptoTeamError as exc:
            raise StageError("market", t, exc) from exc
        by_role = {p.role_id: p for p in market_preds}
        memory = SharedMemory(
            t,
            market_inputs[RoleId.MarketFactor].info,
            by_role.get(RoleId.MarketFactor),
            market_inputs[RoleId.News].info,
            by_role.get(RoleId.News),
        )
        market_return = self.store.market_week(t).market_return if self.store.market_week(t) else None
        flags: list[str] = []
        try:
            market_ens: TeamEnsemble | None = intrateam_ensemble("Market", market_preds)
        except InsufficientDataError:
            market_ens = None
            flags.append("market-ensemble-missing")

        # crypto team
        members = self.inputs.members(f)
        try:
            factor_inputs = self.inputs.crypto_factors(f) if self.config.agent_enabled(RoleId.CryptoFactor) else {}
            tasks = []
            for asset in members:
                for role in self._enabled(CRYPTO_TEAM):
                    inp = factor_inputs.get(asset) if role is RoleId.CryptoFactor else self.inputs.chart(asset, f)
                    if inp is None:
                        continue
                    req = build_interteam_context(
                        asset, prediction_request(inp, t), memory, enabled=not self.config.ablation.no_interteam
                    )
                    tasks.append((role, req))
            prompts += [self._prompt_record(r, q) for r, q in tasks]
            crypto_preds = self._predict_all(tasks)
            self.predictions.record_all(crypto_preds)
        except CryptoTeamError as exc:
            raise StageError("crypto", t, exc) from exc

        grouped: dict[str, list[AgentPrediction]] = defaultdict(list)
        for p in crypto_preds:
            grouped[p.subject].append(p)
        crypto_ens: dict[str, TeamEnsemble] = {}
        for asset in members:
            try:
                crypto_ens[asset] = intrateam_ensemble("Crypto", grouped.get(asset, ()))
            except InsufficientDataError:
                continue

        # portfolio
        realized = {a: r for a in members if (r := self.store.weekly_return(a, t)) is not None}
        for asset in members:
            # stopped trading during week t: held to week end at the last close
            if asset not in realized and (r := self.store.exit_return(asset, t)) is not None:
                realized[asset] = r
                flags.append(f"delisted:{asset}")
        probs = {a: e.mean_prob for a, e in crypto_ens.items()}
        quintiles = form_quintiles(t, probs)
        selected, degenerate = select_target(quintiles)
        if degenerate:
            flags.append("degenerate-quintiles")
        market_decision = market_ens if market_ens is not None else _fall_ensemble(t)
        decision = allocate(market_decision, selected)
        if decision.all_cash:
            flags.append("all-cash")
        try:
            new_state = step(state, decision, realized)
        except KeyError as exc:
            raise StageError("portfolio", t, exc) from exc
        try:
            hml = hml_return(quintiles, realized)
        except (UndefinedMetricError, KeyError):
            hml = None

        ens_records = []
        if market_ens is not None:
            ens_records.append({**market_ens.to_dict(), "truth": truth(market_return)})
        for asset in sorted(crypto_ens):
            ens_records.append({**crypto_ens[asset].to_dict(), "truth": truth(self.store.weekly_return(asset, t))})
        for rec in ens_records:
            self.ensembles.append(rec)
        equal = [realized[a] for a in members if a in realized]
        bench = self.store.weekly_return(self.config.benchmark_asset, t)
        self.week_log.append(
            {
                "week": t,
                "market_decision": decision.market_decision.value,
                "market_prob": market_ens.mean_prob if market_ens else None,
                "market_return": market_return,
                "equal_weight_return": math.fsum(equal) / len(equal) if equal else None,
                "benchmark_return": bench,
                "crypto_weight": decision.crypto_weight,
                "selected": list(decision.selected_assets),
                "hml": hml,
                "flags": flags,
            }
        )
        for rec in prompts:
            self.prompt_log.append(rec)
        return new_state, ledger_row(decision, new_state)

    def run(self, *, max_weeks: int | None = None) -> RunManifest:
        weeks = backtest_weeks(self.config, self.store)
        if not weeks:
            raise ConfigError("no complete test weeks in the cached data")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "config.yaml").write_text(dump_config(self.config), encoding="utf-8")
        manifest = RunManifest(
            self.config.resolved_run_id,
            self.config.config_hash,
            self.store.cache.file_hashes(),
            {"cryptoteam": __version__, "templates": template_version()},
            stages={s: "pending" for s in ("market", "crypto", "portfolio", "report")},
        )

        rows = read_ledger(self.run_dir / "ledger.csv")
        done = [int(r["week"]) for r in rows]
        state = PortfolioState(weeks[0] - 1)
        if rows:
            last = rows[-1]
            holdings = dict(
                (a, float(w)) for a, w in (item.split(":") for item in last["holdings"].split(";") if item)
            )
            state = PortfolioState(int(last["week"]), float(last["value"]), float(last["weekly_return"]), holdings)
        last_done = done[-1] if done else weeks[0] - 1
        for path in (self.ensembles.path, self.week_log.path, self.prompt_log.path):
            _truncate_jsonl(path, lambda r: r.get("week", r.get("week_index")) <= last_done)
        manifest.completed_weeks = done

        processed = 0
        for t in weeks:
            if t in done:
                continue
            if max_weeks is not None and processed >= max_weeks:
                manifest.status = "interrupted"
                manifest.save(self.manifest_path)
                return manifest
            try:
                state, row = self.run_week(t, state)
            except StageError as exc:
                manifest.stages[exc.stage] = f"failed at week {t}: {exc.cause}"
                manifest.status = "failed"
                manifest.save(self.manifest_path)
                raise
            rows.append(row)
            write_ledger(self.run_dir / "ledger.csv", rows)
            manifest.completed_weeks.append(t)
            manifest.save(self.manifest_path)
            processed += 1

        for s in ("market", "crypto", "portfolio"):
            manifest.stages[s] = "done"
        violations = audit_provenance(self.prompt_log.read())
        manifest.provenance_violations = len(violations)
        for v in violations:
            log.error("look-ahead: %s", v)
        generate_report(self.config, self.store)
        manifest.stages["report"] = "done"
        manifest.status = "complete"
        manifest.save(self.manifest_path)
        return manifest


def _fall_ensemble(week: int) -> TeamEnsemble:
    # no valid market prediction: hold the conservative half-cash allocation
    return TeamEnsemble("Market", MARKET, week, {}, 0.0, Trend.Fall, 0.0)


def run_backtest(
    config: RunConfig,
    provider: ChatProvider | None = None,
    *,
    store: MarketDataStore | None = None,
    max_weeks: int | None = None,
) -> RunManifest:
    return Backtest(config, provider, store).run(max_weeks=max_weeks)


def _confusion(pairs: Iterable[tuple[str, str | None]]) -> ConfusionCounts:
    scored = [(Trend(p), Trend(t)) for p, t in pairs if t is not None]
    return ConfusionCounts.from_labels([p for p, _ in scored], [t for _, t in scored])


def build_series(config: RunConfig, store: MarketDataStore | None = None) -> BacktestSeries:
    """Collect report inputs from the run's logs."""
    run_dir = config.run_dir
    weeks_rows = list(JsonlLog(run_dir / "weeks.jsonl").read())
    ledger = read_ledger(run_dir / "ledger.csv")
    if not ledger:
        raise ConfigError(f"no ledger in {run_dir}; run the backtest first")
    weeks = [int(r["week"]) for r in ledger]
    by_week = {r["week"]: r for r in weeks_rows}
    strategies: dict[str, list[float]] = {"Ours": [float(r["weekly_return"]) for r in ledger]}
    for name, key in (("Market", "market_return"), ("1/N", "equal_weight_return"), (config.benchmark_asset, "benchmark_return")):
        values = [by_week.get(w, {}).get(key) for w in weeks]
        if all(v is not None for v in values):
            strategies[name] = values
    market_returns = [by_week[w]["market_return"] for w in weeks]
    regimes = []
    if all(r is not None for r in market_returns) and len(weeks) >= 1:
        levels = [1.0]
        for r in market_returns:
            levels.append(levels[-1] * (1.0 + r))
        regimes = detect_regimes(levels, [weeks[0] - 1, *weeks])

    ensembles = list(JsonlLog(run_dir / "ensembles.jsonl").read())
    truth_of = {(e["subject"], e["week_index"]): e["truth"] for e in ensembles}
    classification = {
        "Market team": _confusion((e["decision"], e["truth"]) for e in ensembles if e["team_id"] == "Market"),
        "Crypto team": _confusion((e["decision"], e["truth"]) for e in ensembles if e["team_id"] == "Crypto"),
    }
    preds = PredictionLog(run_dir / "predictions.jsonl").predictions()
    for role in EXPERT_ROLES:
        mine = [p for p in preds if p.role_id is role and p.valid]
        if mine:
            classification[role.value] = _confusion(
                (p.label.value, truth_of.get((p.subject, p.week_index))) for p in mine
            )
    disagreement: dict[str, list[float]] = defaultdict(list)
    for e in ensembles:
        if len(e["member_probs"]) > 1:
            disagreement[e["team_id"]].append(e["disagreement"])
    flag_counts: dict[str, int] = defaultdict(int)
    for r in weeks_rows:
        for fl in r["flags"]:
            flag_counts[fl] += 1
    flag_counts["invalid_predictions"] = sum(not p.valid for p in preds)
    flag_counts["logprob_fallback"] = sum(p.logprob_fallback for p in preds)
    prompt_flags = [fl for r in JsonlLog(run_dir / "prompts.jsonl").read() for fl in r["flags"]]
    for fl in prompt_flags:
        flag_counts[fl] += 1
    return BacktestSeries(
        weeks=weeks,
        strategy_returns=strategies,
        market_decisions=[Trend(by_week[w]["market_decision"]) for w in weeks],
        market_returns=[r if r is not None else 0.0 for r in market_returns],
        hml=[by_week[w]["hml"] for w in weeks],
        regimes=regimes,
        classification=classification,
        disagreement=dict(disagreement),
        rf_weekly=config.rf_weekly,
        flags=dict(sorted(flag_counts.items())),
    )


def generate_report(config: RunConfig, store: MarketDataStore | None = None) -> dict[str, Path]:
    series = build_series(config, store)
    return write_report(config.run_dir, compile_report(series), series)


# training side


def training_weeks(config: RunConfig, store: MarketDataStore) -> list[int]:
    """Formation weeks whose next-week label also lies inside the training split."""
    return [
        w
        for w in store.weeks
        if store.week_start(w) >= config.train_start and store.week_end(w + 1) <= config.train_end
    ]


def build_training_examples(config: RunConfig, store: MarketDataStore) -> list[TrainingExample]:
    inputs = InputBuilder(config, store)
    examples = []
    for t in training_weeks(config, store):
        nxt = store.market_week(t + 1)
        market_truth = truth(nxt.market_return if nxt else None)
        if market_truth is not None:
            for inp, modality in ((inputs.market_factors(t), Modality.factors), (inputs.news(t), Modality.news)):
                examples.append(
                    TrainingExample(MARKET, t, modality, Trend(market_truth), info_text=inp.info, provenance=inp.provenance)
                )
        factor_inputs = inputs.crypto_factors(t)
        for asset in inputs.members(t):
            label = truth(store.weekly_return(asset, t + 1))
            if label is None:
                continue
            if asset in factor_inputs:
                inp = factor_inputs[asset]
                examples.append(
                    TrainingExample(asset, t, Modality.factors, Trend(label), info_text=inp.info, provenance=inp.provenance)
                )
            chart = inputs.chart(asset, t)
            if chart is not None:
                examples.append(
                    TrainingExample(asset, t, Modality.chart, Trend(label), image_ref=chart.image_ref, provenance=chart.provenance)
                )
    return examples


def example_to_dict(ex: TrainingExample) -> dict[str, Any]:
    d = asdict(ex)
    d["modality"] = ex.modality.value
    d["ground_truth"] = ex.ground_truth.value
    d["provenance"] = [list(p) for p in ex.provenance]
    return d


def example_from_dict(d: dict[str, Any]) -> TrainingExample:
    return TrainingExample(
        d["subject"],
        int(d["week_index"]),
        Modality(d["modality"]),
        Trend(d["ground_truth"]),
        info_text=d.get("info_text"),
        image_ref=d.get("image_ref"),
        explanation=d.get("explanation", ""),
        provenance=tuple((s, int(w)) for s, w in d.get("provenance", ())),
    )


@dataclass
class TrainingOutput:
    annotated: Path
    datasets: dict[str, Path]
    model_refs: dict[str, str]
    skipped: list[SkippedExample]


def annotate_training(
    config: RunConfig, provider: ChatProvider | None = None, store: MarketDataStore | None = None
) -> tuple[Path, list[SkippedExample]]:
    literature = {role: load_literature(config.literature_dir, role) for role in EXPERT_ROLES}
    store = store or open_store(config)
    provider = provider or make_provider(config)
    explainer = agent_roles(config)[RoleId.Explainer]
    examples = build_training_examples(config, store)
    done, skipped = annotate_batch(provider, explainer, examples, literature, parallelism=config.provider.parallelism)
    path = config.run_dir / "annotated.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(dumps(example_to_dict(e)) + "\n" for e in done), encoding="utf-8")
    return path, skipped


def export_datasets(config: RunConfig) -> dict[str, Path]:
    src = config.run_dir / "annotated.jsonl"
    if not src.exists():
        raise ConfigError(f"{src} not found; run annotate first")
    examples = [example_from_dict(r) for r in JsonlLog(src).read()]
    records = [build_finetune_record(e) for e in examples]
    out = {}
    for role in EXPERT_ROLES:
        if any(r.expert is role for r in records):
            out[role.dataset_name] = export_finetune_dataset(records, role, config.run_dir / "finetune")
    return out


def launch_finetunes(
    config: RunConfig,
    service: FineTuneService,
    datasets: dict[str, Path],
    *,
    sleep: Callable[[float], None] | None = None,
    max_polls: int = 120,
) -> dict[str, str]:
    bindings = RoleBindings(bindings_path(config))
    refs = {}
    extra = {"sleep": sleep} if sleep is not None else {}
    for role in EXPERT_ROLES:
        path = datasets.get(role.dataset_name)
        if path is None:
            continue
        refs[role.value] = launch_finetune(
            service,
            path,
            role,
            bindings,
            config.run_dir / "finetune_state",
            base_model=config.base_model,
            max_polls=max_polls,
            **extra,
        )
    return refs


def run_training_pipeline(
    config: RunConfig,
    provider: ChatProvider | None = None,
    *,
    store: MarketDataStore | None = None,
    export_only: bool = True,
    service: FineTuneService | None = None,
    sleep: Callable[[float], None] | None = None,
) -> TrainingOutput:
    annotated, skipped = annotate_training(config, provider, store)
    datasets = export_datasets(config)
    refs: dict[str, str] = {}
    if not export_only:
        if service is None:
            raise ConfigError("fine-tuning requested without a fine-tune service")
        refs = launch_finetunes(config, service, datasets, sleep=sleep)
    return TrainingOutput(annotated, datasets, refs, skipped)


def export_factors(config: RunConfig, store: MarketDataStore | None = None) -> list[Path]:
    store = store or open_store(config)
    inputs = InputBuilder(config, store)
    weeks = [w for w in store.weeks if store.week_start(w) >= config.train_start and store.week_end(w) <= config.test_end]
    crypto = {}
    for w in weeks:
        vectors = []
        for asset in inputs.members(w):
            try:
                vectors.append(compute_crypto_factors(store.weekly(asset), w))
            except InsufficientDataError:
                continue
        crypto[w] = vectors
    market = [compute_market_factors(store.market_weeks, w, inputs.reference_weeks) for w in weeks]
    return export_factor_tables(config.run_dir / "factors", crypto, market)


def render_charts(config: RunConfig, store: MarketDataStore | None = None) -> list[Path]:
    store = store or open_store(config)
    inputs = InputBuilder(config, store)
    weeks = [w for w in store.weeks if store.week_start(w) >= config.train_start and store.week_end(w) <= config.test_end]
    out = []
    for w in weeks:
        for asset in inputs.members(w):
            chart = inputs.chart(asset, w)
            if chart is not None:
                out.append(Path(chart.image_ref))
    return out
