"""Canonical on-disk cache: one sorted CSV per series plus a JSON manifest.

Layout::

    data/{series_kind}/{asset_or_market}/{day|week}.csv
    data/manifest.json

Files are written in a canonical form (fixed column order, sorted rows,
shortest round-trip float repr, ``\\n`` line endings) so that an unchanged
upstream always yields byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import threading
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

SCHEMAS: dict[str, tuple[str, ...]] = {
    "ohlcv": ("date", "open", "high", "low", "close", "volume", "market_cap"),
    "onchain": ("date", "wallet_count", "active_addresses", "tx_count", "payments_count"),
    "search": ("date", "btc", "crypto"),
    "news": ("published_at", "title", "source"),
    "index": ("date", "close"),
}


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    ordered = sorted(rows, key=lambda r: tuple(_fmt(r.get(c)) for c in columns))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in ordered:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class DataCache:
    """Series cache rooted at ``root`` (the ``data/`` directory)."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._manifest_lock = threading.Lock()

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def series_path(self, kind: str, key: str, granularity: str = "day") -> Path:
        return self.root / kind / key / f"{granularity}.csv"

    def load_manifest(self) -> dict[str, Any]:
        if not self.manifest_path.exists():
            return {"series": {}}
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def write_series(
        self,
        kind: str,
        key: str,
        rows: Sequence[Mapping[str, Any]],
        *,
        source: str,
        granularity: str = "day",
    ) -> Path:
        """Write rows canonically; the manifest entry only changes when content does."""
        columns = SCHEMAS[kind]
        text = canonical_csv(columns, rows)
        path = self.series_path(kind, key, granularity)
        series_id = f"{kind}/{key}/{granularity}"
        with self._locks[series_id]:
            path.parent.mkdir(parents=True, exist_ok=True)
            digest = _sha256(text)
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                tmp = path.with_suffix(".csv.tmp")
                tmp.write_text(text, encoding="utf-8", newline="")
                os.replace(tmp, path)
            with self._manifest_lock:
                manifest = self.load_manifest()
                entry = manifest["series"].get(series_id)
                if entry is None or entry.get("sha256") != digest:
                    lines = text.splitlines()[1:]
                    manifest["series"][series_id] = {
                        "source": source,
                        "fetched_at": datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
                        "rows": len(lines),
                        "sha256": digest,
                        "row_hashes": [_sha256(line)[:16] for line in lines],
                    }
                    manifest["series"] = dict(sorted(manifest["series"].items()))
                    self.root.mkdir(parents=True, exist_ok=True)
                    self.manifest_path.write_text(
                        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
                    )
        return path

    def read_series(self, kind: str, key: str, granularity: str = "day") -> list[dict[str, str]]:
        path = self.series_path(kind, key, granularity)
        if not path.exists():
            return []
        with path.open(encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))

    def keys(self, kind: str) -> list[str]:
        base = self.root / kind
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def file_hashes(self) -> dict[str, str]:
        """sha256 of every cached CSV, keyed by relative path."""
        out = {}
        for path in sorted(self.root.rglob("*.csv")):
            out[path.relative_to(self.root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
        return out
