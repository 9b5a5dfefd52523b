"""Paper-trading stub: turn an allocation into market-order intents."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from pathlib import Path

import httpx

from .portfolio import AllocationDecision

log = logging.getLogger(__name__)

EPS = 1e-12


@dataclass(frozen=True)
class OrderIntent:
    week_index: int
    asset: str
    side: str  # buy | sell
    weight_delta: float
    target_weight: float
    order_type: str = "market"


@dataclass(frozen=True)
class OrderReport:
    intents: tuple[OrderIntent, ...]
    sent: int
    failed: int
    intents_path: Path | None = None
    pending_path: Path | None = None


def order_intents(decision: AllocationDecision, current: Mapping[str, float]) -> list[OrderIntent]:
    """One intent per asset whose target weight differs from the current weight."""
    target = decision.holdings
    out = []
    for asset in sorted(set(target) | set(current)):
        delta = target.get(asset, 0.0) - current.get(asset, 0.0)
        if abs(delta) > EPS:
            out.append(OrderIntent(decision.week_index, asset, "buy" if delta > 0 else "sell", delta, target.get(asset, 0.0)))
    return out


def _write_jsonl(path: Path, intents: list[OrderIntent], append: bool = False) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for intent in intents:
            fh.write(json.dumps(asdict(intent), sort_keys=True) + "\n")
    return path


def execute_paper_trades(
    decision: AllocationDecision,
    current: Mapping[str, float],
    out_dir: str | Path,
    *,
    endpoint: str | None = None,
    dry_run: bool = True,
    live: bool = False,
    client: httpx.Client | None = None,
) -> OrderReport:
    """Emit order intents for moving from ``current`` to the decision's weights.

    Dry runs only write ``orders/{week}.jsonl``. Otherwise intents are posted
    to a paper-trading ``endpoint``; rejected or unreachable orders go to
    ``orders/pending.jsonl`` for a later retry.
    """
    if live:
        raise NotImplementedError("live order routing is not supported")
    intents = order_intents(decision, current)
    base = Path(out_dir) / "orders"
    intents_path = _write_jsonl(base / f"{decision.week_index}.jsonl", intents)
    if dry_run or not intents:
        return OrderReport(tuple(intents), 0, 0, intents_path)
    if not endpoint:
        raise ValueError("an endpoint is required unless dry_run is set")
    http = client or httpx.Client(timeout=30.0)
    sent, failed = 0, []
    try:
        for intent in intents:
            try:
                resp = http.post(endpoint, json=asdict(intent))
                ok = resp.status_code < 400
            except httpx.HTTPError as exc:
                log.warning("order for %s failed: %s", intent.asset, exc)
                ok = False
            if ok:
                sent += 1
            else:
                failed.append(intent)
    finally:
        if client is None:
            http.close()
    pending = _write_jsonl(base / "pending.jsonl", failed, append=True) if failed else None
    return OrderReport(tuple(intents), sent, len(failed), intents_path, pending)
