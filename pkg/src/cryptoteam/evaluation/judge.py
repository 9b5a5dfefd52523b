"""Explanation quality scoring by a judge model."""

from __future__ import annotations

import json
import logging
import math
import re
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

from ..agents.providers import ChatProvider
from ..agents.types import AgentRole, CompletionRequest
from ..errors import ProviderError, RetryableError

log = logging.getLogger(__name__)

CRITERIA = ("professionalism", "objectivity", "clarity", "consistency", "rationale")

JUDGE_SYSTEM = (
    "You are an expert reviewer of cryptocurrency investment analysis. Rate the explanation you are given "
    "on five criteria, each a number between 0 and 1:\n"
    "professionalism: use of accurate domain terminology and sound financial reasoning;\n"
    "objectivity: reliance on the provided data rather than speculation or sentiment;\n"
    "clarity: how easy the explanation is to follow;\n"
    "consistency: agreement between the explanation and the stated prediction;\n"
    "rationale: strength of the causal link drawn from evidence to conclusion.\n"
    'Reply with a single JSON object such as {"professionalism": 0.8, "objectivity": 0.7, '
    '"clarity": 0.9, "consistency": 1.0, "rationale": 0.6} and nothing else.'
)


@dataclass(frozen=True)
class JudgeItem:
    response_id: str
    model: str
    text: str


@dataclass(frozen=True)
class ExplainScore:
    response_id: str
    model: str
    professionalism: float
    objectivity: float
    clarity: float
    consistency: float
    rationale: float

    def values(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in CRITERIA}


@dataclass(frozen=True)
class JudgeResult:
    scores: list[ExplainScore]
    means: dict[str, dict[str, float]]
    skipped: list[tuple[str, str]]


def parse_scores(raw: str) -> dict[str, float]:
    """Read the five criteria from the first JSON object in ``raw``; each must be in [0, 1]."""
    m = re.search(r"\{.*\}", raw, re.DOTALL)
    if not m:
        raise ValueError("no JSON object in judge output")
    data = json.loads(m.group(0))
    out = {}
    for c in CRITERIA:
        if c not in data:
            raise ValueError(f"missing criterion {c}")
        value = float(data[c])
        if not (0.0 <= value <= 1.0) or math.isnan(value):
            raise ValueError(f"{c}={value} outside [0, 1]")
        out[c] = value
    return out


def judge_explanations(provider: ChatProvider, judge: AgentRole, items: Sequence[JudgeItem]) -> JudgeResult:
    """Score each explanation; unusable judge output skips the item."""
    scores, skipped = [], []
    for item in items:
        request = CompletionRequest(JUDGE_SYSTEM, f"Explanation:\n{item.text}", want_logprobs=False, subject=item.response_id)
        try:
            values = parse_scores(provider.complete(judge, request).text)
        except (ValueError, ProviderError, RetryableError) as exc:
            log.warning("judge skipped %s: %s", item.response_id, exc)
            skipped.append((item.response_id, str(exc)))
            continue
        scores.append(ExplainScore(item.response_id, item.model, **values))
    grouped: dict[str, list[ExplainScore]] = defaultdict(list)
    for s in scores:
        grouped[s.model].append(s)
    means = {
        model: {c: math.fsum(getattr(s, c) for s in group) / len(group) for c in CRITERIA}
        for model, group in sorted(grouped.items())
    }
    return JudgeResult(scores, means, skipped)
