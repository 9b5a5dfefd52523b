"""Chat-completion backends: an OpenAI-compatible HTTP client and a scripted mock."""

from __future__ import annotations

import base64
import json
import mimetypes
import os
import re
import threading
import time
from collections import defaultdict, deque
from collections.abc import Callable, Iterable, Mapping
from pathlib import Path
from typing import Any, Protocol

import httpx

from ..errors import ConfigError, ProviderError, RetryableError
from ..market_data.providers import with_retries
from ..prompts import user_content
from .types import AgentRole, Completion, CompletionRequest, ProviderConfig, TokenLogprob


class ChatProvider(Protocol):
    def complete(self, role: AgentRole, request: CompletionRequest) -> Completion: ...


def image_url(ref: str) -> str:
    """Pass URLs through; inline local files as base64 data URLs."""
    if re.match(r"^(https?|data):", ref):
        return ref
    path = Path(ref)
    if not path.is_file():
        raise ProviderError(f"image not found: {ref}")
    mime = mimetypes.guess_type(path.name)[0] or "image/png"
    return f"data:{mime};base64,{base64.b64encode(path.read_bytes()).decode('ascii')}"


def chat_payload(role: AgentRole, request: CompletionRequest) -> dict[str, Any]:
    image = image_url(request.image_ref) if request.image_ref else None
    payload: dict[str, Any] = {
        "model": role.model_ref,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": user_content(request.user, image)},
        ],
        "temperature": request.temperature,
    }
    if request.want_logprobs:
        payload["logprobs"] = True
    return payload


def parse_chat_response(body: Mapping[str, Any]) -> Completion:
    try:
        choice = body["choices"][0]
        text = choice["message"]["content"] or ""
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(f"malformed chat response: {exc}") from exc
    content = (choice.get("logprobs") or {}).get("content")
    tokens = tuple(TokenLogprob(t["token"], float(t["logprob"])) for t in content) if content else None
    return Completion(text, tokens)


class OpenAIChatProvider:
    """Chat-completions client with token logprobs and bounded retries."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self.sleep = sleep
        key = os.environ.get(config.api_key_env, "")
        headers = {"Content-Type": "application/json", **config.extra_headers}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=config.timeout)
        self.headers = headers

    def post(self, path: str, payload: Mapping[str, Any]) -> dict[str, Any]:
        url = f"{self.config.endpoint.rstrip('/')}/{path.lstrip('/')}"
        try:
            resp = self.client.post(url, json=payload, headers=self.headers, timeout=self.config.timeout)
        except httpx.TransportError as exc:
            raise RetryableError(f"POST {path}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableError(f"POST {path}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"POST {path}: HTTP {resp.status_code}: {resp.text[:300]}")
        return resp.json()

    def complete(self, role: AgentRole, request: CompletionRequest) -> Completion:
        payload = chat_payload(role, request)
        body = with_retries(
            lambda: self.post("chat/completions", payload),
            max_retries=self.config.max_retries,
            backoff=self.config.backoff,
            sleep=self.sleep,
        )
        return parse_chat_response(body)


_WORDS = re.compile(r"\s*\S+")


def tokenize(text: str, label_logprob: float | None) -> tuple[TokenLogprob, ...] | None:
    """Whitespace-preserving word tokens; the first Rise/Fall word after a
    ``trend:`` prefix carries ``label_logprob``, all others 0."""
    if label_logprob is None:
        return None
    prefix = re.search(r"trend\s*:", text, re.IGNORECASE)
    start = prefix.end() if prefix else 0
    tokens, pos, assigned = [], 0, False
    for m in _WORDS.finditer(text):
        piece = m.group(0)
        lp = 0.0
        if not assigned and m.start() >= start and re.match(r"(rise|fall)", piece.strip(), re.IGNORECASE):
            lp, assigned = label_logprob, True
        tokens.append(TokenLogprob(piece, lp))
        pos = m.end()
    if pos < len(text):
        tokens.append(TokenLogprob(text[pos:], 0.0))
    return tuple(tokens)


class ScriptedProvider:
    """Offline provider answering from JSONL entries keyed by (role, subject, week).

    Each line holds ``role``, ``subject``, ``week`` and ``text``, plus either
    ``logprob`` (for the classification token) or explicit ``tokens`` as
    ``[[token, logprob], ...]``. Omitting both simulates a backend without
    logprobs. Repeated keys are served in file order, so a reprompt can be
    scripted by listing two answers; the last answer repeats once exhausted.
    ``subject`` and ``week`` may be ``"*"`` to give a role a default answer;
    ``{subject}`` and ``{week}`` in its text are filled from the request.
    Entries with ``"error": "retryable"`` raise ``RetryableError``.
    """

    def __init__(self, entries: Iterable[Mapping[str, Any]]) -> None:
        self._queues: dict[tuple[str, str, str], deque[Mapping[str, Any]]] = defaultdict(deque)
        for e in entries:
            self._queues[(str(e["role"]), str(e["subject"]), str(e["week"]))].append(e)
        self._lock = threading.Lock()
        self.calls: list[tuple[str, str, int, CompletionRequest]] = []

    @classmethod
    def from_jsonl(cls, *paths: str | Path) -> ScriptedProvider:
        entries = []
        for path in paths:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"mock script not found: {p}")
            with open(p, encoding="utf-8") as fh:
                entries.extend(json.loads(line) for line in fh if line.strip())
        return cls(entries)

    def complete(self, role: AgentRole, request: CompletionRequest) -> Completion:
        rid, subject, week = role.role_id.value, request.subject, str(request.week_index)
        key = (rid, subject, week)
        with self._lock:
            self.calls.append((rid, subject, request.week_index, request))
            entry = None
            for k in (key, (rid, subject, "*"), (rid, "*", "*")):
                queue = self._queues.get(k)
                if queue:
                    entry = queue.popleft() if len(queue) > 1 else queue[0]
                    break
            if entry is None:
                raise ProviderError(f"no scripted answer for {key}")
        if entry.get("error") == "retryable":
            raise RetryableError(f"scripted transient failure for {key}")
        if entry.get("error"):
            raise ProviderError(str(entry["error"]))
        text = str(entry.get("text", "")).replace("{subject}", subject).replace("{week}", week)
        if "tokens" in entry:
            tokens = tuple(TokenLogprob(str(t), float(lp)) for t, lp in entry["tokens"])
        else:
            tokens = tokenize(text, entry.get("logprob")) if request.want_logprobs else None
        return Completion(text, tokens)
