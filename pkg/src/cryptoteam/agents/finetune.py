"""Fine-tune job submission, polling with a resumable pending state, role bindings."""

from __future__ import annotations

import json
import logging
import os
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from ..errors import ProviderError, RetryableError
from ..roles import EXPERT_ROLES, RoleId
from .types import AgentRole, ProviderConfig

log = logging.getLogger(__name__)

TERMINAL_OK = "succeeded"
TERMINAL_FAILED = frozenset({"failed", "cancelled"})


class FineTunePending(RetryableError):
    """Polling budget exhausted; the job id is kept in the pending state file."""

    def __init__(self, job_id: str, state_path: Path) -> None:
        self.job_id = job_id
        self.state_path = state_path
        super().__init__(f"fine-tune job {job_id} still running; resume from {state_path}")


@dataclass(frozen=True)
class JobStatus:
    state: str
    model_ref: str | None = None
    message: str = ""


class FineTuneService(Protocol):
    def submit(self, dataset_path: Path, base_model: str) -> str: ...

    def status(self, job_id: str) -> JobStatus: ...


class OpenAIFineTuneService:
    """Uploads a JSONL dataset and creates a fine-tuning job over HTTP."""

    def __init__(self, config: ProviderConfig, *, client: httpx.Client | None = None) -> None:
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)
        key = os.environ.get(config.api_key_env, "")
        self.headers = {"Authorization": f"Bearer {key}"} if key else {}

    def _check(self, resp: httpx.Response, what: str) -> dict:
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableError(f"{what}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            try:
                message = resp.json().get("error", {}).get("message", resp.text)
            except ValueError:
                message = resp.text
            raise ProviderError(f"{what} rejected: {message}")
        return resp.json()

    def submit(self, dataset_path: Path, base_model: str) -> str:
        base = self.config.endpoint.rstrip("/")
        with open(dataset_path, "rb") as fh:
            resp = self.client.post(
                f"{base}/files",
                headers=self.headers,
                data={"purpose": "fine-tune"},
                files={"file": (Path(dataset_path).name, fh, "application/jsonl")},
            )
        file_id = self._check(resp, "file upload")["id"]
        resp = self.client.post(
            f"{base}/fine_tuning/jobs", headers=self.headers, json={"training_file": file_id, "model": base_model}
        )
        return self._check(resp, "job creation")["id"]

    def status(self, job_id: str) -> JobStatus:
        resp = self.client.get(f"{self.config.endpoint.rstrip('/')}/fine_tuning/jobs/{job_id}", headers=self.headers)
        body = self._check(resp, "job status")
        error = body.get("error") or {}
        return JobStatus(body.get("status", "unknown"), body.get("fine_tuned_model"), error.get("message", "") if isinstance(error, dict) else str(error))


@dataclass
class ScriptedFineTuneService:
    """Offline stand-in: returns ``statuses`` in order, then repeats the last."""

    job_id: str = "ftjob-0001"
    statuses: Sequence[JobStatus] = (JobStatus("succeeded", "ft-0001"),)
    reject: str | None = None
    submissions: list[tuple[str, str]] = field(default_factory=list)
    polls: int = 0

    def submit(self, dataset_path: Path, base_model: str) -> str:
        if self.reject:
            raise ProviderError(self.reject)
        self.submissions.append((str(dataset_path), base_model))
        return self.job_id

    def status(self, job_id: str) -> JobStatus:
        idx = min(self.polls, len(self.statuses) - 1)
        self.polls += 1
        return self.statuses[idx]


class RoleBindings:
    """Role to model_ref map persisted as JSON."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.refs: dict[str, str] = json.loads(self.path.read_text(encoding="utf-8")) if self.path.exists() else {}

    def get(self, role: RoleId) -> str | None:
        return self.refs.get(role.value)

    def bind(self, role: RoleId, model_ref: str) -> None:
        self.refs[role.value] = model_ref
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(dict(sorted(self.refs.items())), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)

    def roles(self, defaults: Mapping[RoleId, str]) -> dict[RoleId, AgentRole]:
        """One ``AgentRole`` per role; bound refs override ``defaults``."""
        out = {}
        for role_id in (*EXPERT_ROLES, RoleId.Explainer, RoleId.Judge):
            ref = self.get(role_id) or defaults.get(role_id)
            if ref:
                out[role_id] = AgentRole(role_id, ref)
        return out


def pending_path(state_dir: str | Path, role: RoleId) -> Path:
    return Path(state_dir) / f"{role.dataset_name}.pending.json"


def launch_finetune(
    service: FineTuneService,
    dataset_path: str | Path,
    role: RoleId,
    bindings: RoleBindings,
    state_dir: str | Path,
    *,
    base_model: str = "gpt-4o-2024-08-06",
    poll_interval: float = 30.0,
    max_polls: int = 120,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Submit (or resume) a fine-tune for ``role`` and bind the resulting model.

    A pending state file records the job id right after submission, so an
    interrupted or timed-out run resumes polling without resubmitting.
    """
    state = pending_path(state_dir, role)
    if state.exists():
        job_id = json.loads(state.read_text(encoding="utf-8"))["job_id"]
        log.info("resuming fine-tune job %s for %s", job_id, role.value)
    else:
        job_id = service.submit(Path(dataset_path), base_model)
        state.parent.mkdir(parents=True, exist_ok=True)
        state.write_text(json.dumps({"job_id": job_id, "role": role.value, "dataset": str(dataset_path)}) + "\n", encoding="utf-8")
    for attempt in range(max_polls):
        status = service.status(job_id)
        if status.state == TERMINAL_OK:
            if not status.model_ref:
                raise ProviderError(f"job {job_id} succeeded without a model id")
            bindings.bind(role, status.model_ref)
            state.unlink()
            return status.model_ref
        if status.state in TERMINAL_FAILED:
            state.unlink()
            raise ProviderError(f"fine-tune job {job_id} {status.state}: {status.message}")
        if attempt + 1 < max_polls:
            sleep(poll_interval)
    raise FineTunePending(job_id, state)
