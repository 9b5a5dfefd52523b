"""Append-only JSONL stores for predictions and other per-run records."""

from __future__ import annotations

import json
import threading
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from .types import AgentPrediction


def dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class JsonlLog:
    """Serialized appends; each line is one JSON object with sorted keys."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: Any) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(dumps(record) + "\n")

    def read(self) -> Iterator[dict[str, Any]]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield json.loads(line)


class PredictionLog(JsonlLog):
    """Prediction records deduplicated by request key.

    A retried send that reproduces an already logged request key is dropped,
    so re-running a week never doubles its entries.
    """

    def __init__(self, path: str | Path) -> None:
        super().__init__(path)
        self._keys = {r.get("request_key") for r in self.read()}

    def record(self, prediction: AgentPrediction) -> bool:
        with self._lock:
            if prediction.request_key and prediction.request_key in self._keys:
                return False
            self._keys.add(prediction.request_key)
        self.append(prediction.to_dict())
        return True

    def record_all(self, predictions: Iterable[AgentPrediction]) -> int:
        return sum(self.record(p) for p in predictions)

    def predictions(self) -> list[AgentPrediction]:
        return [AgentPrediction.from_dict(r) for r in self.read()]
