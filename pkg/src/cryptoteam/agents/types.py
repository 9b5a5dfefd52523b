"""Value types exchanged between the orchestrator, agents and providers."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

from ..factors import Trend
from ..roles import RoleId

VISION_ROLES = frozenset({RoleId.Technical, RoleId.Explainer})


@dataclass(frozen=True)
class AgentRole:
    role_id: RoleId
    model_ref: str

    def __post_init__(self) -> None:
        if not self.model_ref:
            raise ValueError(f"{self.role_id.value} has no model_ref")


@dataclass(frozen=True)
class CompletionRequest:
    system: str
    user: str
    image_ref: str | None = None
    want_logprobs: bool = True
    temperature: float = 0.0
    subject: str = ""
    week_index: int = -1
    # (source, week) pairs of every datum rendered into the prompt
    provenance: tuple[tuple[str, int], ...] = ()
    flags: tuple[str, ...] = ()

    def key(self, role: AgentRole) -> str:
        """Stable identity of the request, used to deduplicate retried sends."""
        payload = json.dumps(
            [role.role_id.value, role.model_ref, self.system, self.user, self.image_ref, self.temperature],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class TokenLogprob:
    token: str
    logprob: float


@dataclass(frozen=True)
class Completion:
    text: str
    tokens: tuple[TokenLogprob, ...] | None = None


@dataclass(frozen=True)
class AgentPrediction:
    role_id: RoleId
    subject: str
    week_index: int
    label: Trend | None
    logprob_rise: float | None
    explanation: str
    raw: str
    valid: bool = True
    error: str = ""
    logprob_fallback: bool = False
    request_key: str = ""
    model_ref: str = ""
    provenance: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if self.valid:
            if self.label is None or self.logprob_rise is None:
                raise ValueError("a valid prediction needs a label and logprob_rise")
            if not (self.logprob_rise <= 0.0 and math.exp(self.logprob_rise) > 0.0):
                raise ValueError(f"logprob_rise {self.logprob_rise} outside (-inf, 0]")

    @property
    def prob_rise(self) -> float:
        if self.logprob_rise is None:
            raise ValueError("invalid prediction has no probability")
        return math.exp(self.logprob_rise)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["role_id"] = self.role_id.value
        d["label"] = self.label.value if self.label else None
        d["provenance"] = [list(p) for p in self.provenance]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AgentPrediction:
        return cls(
            role_id=RoleId(d["role_id"]),
            subject=d["subject"],
            week_index=int(d["week_index"]),
            label=Trend(d["label"]) if d.get("label") else None,
            logprob_rise=d.get("logprob_rise"),
            explanation=d.get("explanation", ""),
            raw=d.get("raw", ""),
            valid=bool(d.get("valid", True)),
            error=d.get("error", ""),
            logprob_fallback=bool(d.get("logprob_fallback", False)),
            request_key=d.get("request_key", ""),
            model_ref=d.get("model_ref", ""),
            provenance=tuple((str(s), int(w)) for s, w in d.get("provenance", ())),
        )


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    parallelism: int = 4
    backoff: float = 1.0
    extra_headers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
