"""Expert predictions, output parsing and explanation annotation."""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from ..errors import ParseError, ProviderError, RetryableError
from ..factors import Trend
from ..market_data.types import MARKET
from ..prompts import TrainingExample, explanation_messages, target_slots
from ..roles import RoleId
from .providers import ChatProvider
from .types import VISION_ROLES, AgentPrediction, AgentRole, Completion, CompletionRequest, TokenLogprob

log = logging.getLogger(__name__)

LOG_FLOOR = math.log(1e-12)
FALLBACK_RISE = math.log(0.75)
FALLBACK_FALL = math.log(0.25)

_TREND_LINE = re.compile(r"^\s*(price|market)\s+trend\s*:\s*(.*)$", re.IGNORECASE)
_LABEL = re.compile(r"^[\W_]*(rise|fall)\b", re.IGNORECASE)
_EXPLANATION = re.compile(r"explanation\s*:", re.IGNORECASE)
_PREFIX = re.compile(r"trend\s*:", re.IGNORECASE)


def format_reminder(subject: str) -> str:
    name = target_slots(subject == MARKET)["trend_name"]
    return (
        "Your previous answer did not follow the required format. Reply exactly as:\n"
        f"{name}: Rise or Fall\nExplanation: (your explanation)"
    )


def parse_prediction_output(raw: str) -> tuple[Trend, str]:
    """Split ``"{Price|Market} trend: X\\nExplanation: Y"`` into (X, Y)."""
    lines = raw.strip().splitlines()
    if not lines:
        raise ParseError("empty output")
    m = _TREND_LINE.match(lines[0])
    if not m:
        raise ParseError(f"missing trend line in {raw[:80]!r}")
    label_match = _LABEL.match(m.group(2))
    if not label_match:
        raise ParseError(f"unknown trend label {m.group(2).strip()!r}")
    label = Trend.parse(label_match.group(1))
    rest = "\n".join(lines[1:])
    exp = _EXPLANATION.search(rest)
    explanation = rest[exp.end() :] if exp else rest
    return label, explanation.strip()


def classification_token(tokens: Sequence[TokenLogprob]) -> tuple[Trend, float] | None:
    """First token after the ``trend:`` prefix whose text begins Rise or Fall."""
    text = "".join(t.token for t in tokens)
    prefix = _PREFIX.search(text)
    start = prefix.end() if prefix else 0
    offset = 0
    for tok in tokens:
        begin, offset = offset, offset + len(tok.token)
        if offset <= start:
            continue
        word = tok.token.strip().lower()
        # a token straddling the prefix counts only for the part after it
        if begin < start:
            word = tok.token[start - begin :].strip().lower()
        if word.startswith("rise"):
            return Trend.Rise, tok.logprob
        if word.startswith("fall"):
            return Trend.Fall, tok.logprob
    return None


def rise_logprob(label: Trend, logprob: float) -> float:
    """Log probability of Rise given the emitted token and its log probability."""
    lp = min(logprob, 0.0)
    if label is Trend.Rise:
        return max(lp, LOG_FLOOR)
    p_fall = math.exp(lp)
    if p_fall >= 1.0:
        return LOG_FLOOR
    return max(math.log1p(-p_fall), LOG_FLOOR)


def _interpret(completion: Completion) -> tuple[Trend, str, float, bool]:
    label, explanation = parse_prediction_output(completion.text)
    token = classification_token(completion.tokens) if completion.tokens else None
    if token is None or token[0] is not label:
        return label, explanation, FALLBACK_RISE if label is Trend.Rise else FALLBACK_FALL, True
    return label, explanation, rise_logprob(label, token[1]), False


def predict(provider: ChatProvider, role: AgentRole, request: CompletionRequest) -> AgentPrediction:
    """Ask ``role`` for a Rise/Fall call; one reprompt on malformed output.

    Transport failures surface as ``RetryableError`` after the provider's own
    retries. A second malformed answer yields an invalid prediction.
    """
    if request.image_ref and role.role_id not in VISION_ROLES:
        raise ValueError(f"{role.role_id.value} cannot take an image input")
    base = dict(
        role_id=role.role_id,
        subject=request.subject,
        week_index=request.week_index,
        request_key=request.key(role),
        model_ref=role.model_ref,
        provenance=request.provenance,
    )
    completion = provider.complete(role, request)
    try:
        label, explanation, lp, fallback = _interpret(completion)
    except ParseError as first:
        retry = replace(request, user=f"{request.user}\n\n{format_reminder(request.subject)}")
        completion = provider.complete(role, retry)
        try:
            label, explanation, lp, fallback = _interpret(completion)
        except ParseError as second:
            log.warning("%s %s week %d: unparseable output (%s; %s)", role.role_id.value, request.subject, request.week_index, first, second)
            return AgentPrediction(
                label=None, logprob_rise=None, explanation="", raw=completion.text, valid=False, error=str(second), **base
            )
    return AgentPrediction(
        label=label, logprob_rise=lp, explanation=explanation, raw=completion.text, logprob_fallback=fallback, **base
    )


@dataclass(frozen=True)
class SkippedExample:
    subject: str
    week_index: int
    expert: RoleId
    reason: str


def annotation_request(example: TrainingExample, literature: str) -> CompletionRequest:
    system, user = explanation_messages(example, literature)
    return CompletionRequest(
        system,
        user,
        image_ref=example.image_ref,
        want_logprobs=False,
        subject=example.subject,
        week_index=example.week_index,
        provenance=example.provenance,
    )


def annotate_explanation(
    provider: ChatProvider,
    explainer: AgentRole,
    example: TrainingExample,
    literature: str,
    skipped: list[SkippedExample] | None = None,
) -> str | None:
    """Explanation text for one training pair, or ``None`` when skipped."""
    try:
        completion = provider.complete(explainer, annotation_request(example, literature))
        text = completion.text.strip()
        reason = "" if text else "empty response"
    except (ProviderError, RetryableError) as exc:
        text, reason = "", f"provider failure: {exc}"
    if reason:
        log.warning("skipping %s week %d (%s): %s", example.subject, example.week_index, example.expert.value, reason)
        if skipped is not None:
            skipped.append(SkippedExample(example.subject, example.week_index, example.expert, reason))
        return None
    return text


def annotate_batch(
    provider: ChatProvider,
    explainer: AgentRole,
    examples: Sequence[TrainingExample],
    literature: Mapping[RoleId, str],
    *,
    parallelism: int = 4,
) -> tuple[list[TrainingExample], list[SkippedExample]]:
    """Annotate ``examples`` concurrently; output keeps input order."""
    skipped: list[list[SkippedExample]] = [[] for _ in examples]

    def one(i: int) -> str | None:
        ex = examples[i]
        return annotate_explanation(provider, explainer, ex, literature[ex.expert], skipped[i])

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        texts = list(pool.map(one, range(len(examples))))
    done = [replace(ex, explanation=t) for ex, t in zip(examples, texts) if t is not None]
    return done, [s for group in skipped for s in group]
