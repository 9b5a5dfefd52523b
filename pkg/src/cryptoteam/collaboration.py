"""Team ensembles and shared market context for crypto-team prompts."""

from __future__ import annotations

import math
import statistics
from collections.abc import Iterable
from dataclasses import dataclass, replace
from typing import Any

from .agents.types import AgentPrediction, CompletionRequest
from .errors import InsufficientDataError
from .factors import Trend

DEGRADED_FLAG = "no-market-context"
CONTEXT_HEADER = "Market context for the same week:"
CONTEXT_BLOCKS = (
    "Market factor information",
    "Market factor expert prediction",
    "News headlines",
    "News expert prediction",
)


def decide(mean_prob: float) -> Trend:
    """Rise iff ``mean_prob`` is strictly above one half."""
    if not 0.0 <= mean_prob <= 1.0:
        raise ValueError(f"probability {mean_prob} outside [0, 1]")
    return Trend.Rise if mean_prob > 0.5 else Trend.Fall


@dataclass(frozen=True)
class TeamEnsemble:
    team_id: str
    subject: str
    week_index: int
    member_probs: dict[str, float]
    mean_prob: float
    decision: Trend
    disagreement: float
    dropped: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "team_id": self.team_id,
            "subject": self.subject,
            "week_index": self.week_index,
            "member_probs": dict(sorted(self.member_probs.items())),
            "mean_prob": self.mean_prob,
            "decision": self.decision.value,
            "disagreement": self.disagreement,
            "dropped": list(self.dropped),
        }


def intrateam_ensemble(team_id: str, predictions: Iterable[AgentPrediction]) -> TeamEnsemble:
    """Average the members' linear Rise probabilities; invalid members are dropped."""
    preds = list(predictions)
    if len({(p.subject, p.week_index) for p in preds}) > 1:
        raise ValueError("ensemble members must share subject and week")
    valid = [p for p in preds if p.valid]
    if not valid:
        raise InsufficientDataError(f"{team_id}: no valid member predictions")
    probs: dict[str, float] = {}
    for p in valid:
        if p.role_id.value in probs:
            raise ValueError(f"duplicate member {p.role_id.value}")
        probs[p.role_id.value] = p.prob_rise
    values = list(probs.values())
    # fsum is correctly rounded, hence independent of member order
    mean = min(max(math.fsum(values) / len(values), min(values)), max(values))
    return TeamEnsemble(
        team_id,
        valid[0].subject,
        valid[0].week_index,
        probs,
        mean,
        decide(mean),
        statistics.pstdev(values),
        tuple(sorted(p.role_id.value for p in preds if not p.valid)),
    )


@dataclass(frozen=True)
class SharedMemory:
    """Market-team inputs and outputs for one week, written before crypto-team reads."""

    week_index: int
    market_factor_input: str | None = None
    market_factor_prediction: AgentPrediction | None = None
    news_input: str | None = None
    news_prediction: AgentPrediction | None = None

    @property
    def complete(self) -> bool:
        entries = (self.market_factor_input, self.market_factor_prediction, self.news_input, self.news_prediction)
        if any(e is None for e in entries):
            return False
        preds = (self.market_factor_prediction, self.news_prediction)
        return all(p.valid and p.week_index == self.week_index for p in preds)


def _prediction_text(pred: AgentPrediction) -> str:
    return f"Market trend: {pred.label.value}\nExplanation: {pred.explanation}"


def market_context(memory: SharedMemory) -> str:
    """Market inputs and predictions in the order: factors, factor call, news, news call."""
    bodies = (
        memory.market_factor_input,
        _prediction_text(memory.market_factor_prediction),
        memory.news_input,
        _prediction_text(memory.news_prediction),
    )
    blocks = [f"{title}:\n{body}\n(End of {title[0].lower()}{title[1:]})" for title, body in zip(CONTEXT_BLOCKS, bodies)]
    return CONTEXT_HEADER + "\n\n" + "\n\n".join(blocks)


def build_interteam_context(
    subject: str,
    request: CompletionRequest,
    memory: SharedMemory | None,
    *,
    enabled: bool = True,
) -> CompletionRequest:
    """Append the week's market context to a crypto-team request.

    With ``enabled=False`` the request is returned unchanged. Incomplete
    memory yields the plain request flagged as degraded.
    """
    if not enabled:
        return request
    if subject != request.subject:
        raise ValueError(f"request is for {request.subject!r}, not {subject!r}")
    if memory is None or not memory.complete or memory.week_index != request.week_index:
        return replace(request, flags=(*request.flags, DEGRADED_FLAG))
    provenance = {
        *request.provenance,
        *memory.market_factor_prediction.provenance,
        *memory.news_prediction.provenance,
    }
    return replace(
        request,
        user=f"{request.user}\n\n{market_context(memory)}",
        provenance=tuple(sorted(provenance)),
    )
