"""Run configuration: YAML file plus ``CRYPTOTEAM_*`` environment overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .market_data.resample import parse_weekday
from .roles import RoleId

ENV_PREFIX = "CRYPTOTEAM_"
DEFAULT_MODEL = "gpt-4o-2024-08-06"


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "scripted"  # scripted | openai
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    parallelism: int = 4
    scripts: tuple[str, ...] = ()
    models: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Ablation:
    disabled_agents: tuple[str, ...] = ()
    no_interteam: bool = False


@dataclass(frozen=True)
class RunConfig:
    run_id: str | None = None
    data_dir: str = "data"
    runs_dir: str = "runs"
    literature_dir: str = "literature"
    fixtures_dir: str | None = None
    assets: tuple[str, ...] = ()
    data_start: date = date(2021, 6, 1)
    reference_end: date = date(2023, 5, 31)
    train_start: date = date(2023, 6, 1)
    train_end: date = date(2023, 10, 31)
    test_start: date = date(2023, 11, 1)
    test_end: date = date(2024, 9, 30)
    universe_size: int = 30
    exclude_stablecoins: bool = False
    week_boundary: str = "monday"
    rf_weekly: float = 0.0
    seed: int = 0
    benchmark_asset: str = "BTC"
    base_model: str = DEFAULT_MODEL
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    ablation: Ablation = field(default_factory=Ablation)

    def __post_init__(self) -> None:
        if not self.data_start <= self.train_start <= self.train_end:
            raise ConfigError("need data_start <= train_start <= train_end")
        if self.test_start <= self.train_end:
            raise ConfigError("test_start must come after train_end")
        if self.test_end < self.test_start:
            raise ConfigError("test_end precedes test_start")
        if self.reference_end < self.data_start:
            raise ConfigError("reference_end precedes data_start")
        if self.universe_size < 1:
            raise ConfigError("universe_size must be positive")
        if self.provider.kind not in ("scripted", "openai"):
            raise ConfigError(f"unknown provider kind {self.provider.kind!r}")
        if self.provider.timeout <= 0 or self.provider.max_retries < 0 or self.provider.parallelism < 1:
            raise ConfigError("provider timeout, retries or parallelism out of range")
        try:
            parse_weekday(self.week_boundary)
            for name in self.ablation.disabled_agents:
                RoleId(name)
            for name in self.provider.models:
                RoleId(name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return json.loads(json.dumps(dataclasses.asdict(self), default=str))

    @property
    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("run_id")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def resolved_run_id(self) -> str:
        return self.run_id or f"run-{self.config_hash[:12]}"

    @property
    def run_dir(self) -> Path:
        return Path(self.runs_dir) / self.resolved_run_id

    def model_for(self, role: RoleId) -> str:
        return self.provider.models.get(role.value, self.base_model)

    def agent_enabled(self, role: RoleId) -> bool:
        return role.value not in self.ablation.disabled_agents

    def with_overrides(self, **changes: Any) -> RunConfig:
        return from_mapping(_merge(self.to_dict(), changes))


def _merge(base: dict[str, Any], changes: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in changes.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _coerce(tp: Any, value: Any, name: str) -> Any:
    if value is None:
        return None
    try:
        if tp in ("date", date):
            return value if isinstance(value, date) else date.fromisoformat(str(value))
        if tp in ("bool",):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if tp in ("int",):
            return int(value)
        if tp in ("float",):
            return float(value)
        if isinstance(tp, str) and tp.startswith("tuple"):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            return tuple(str(v) for v in value)
        if isinstance(tp, str) and tp.startswith("dict"):
            if isinstance(value, str):
                value = json.loads(value)
            return {str(k): str(v) for k, v in dict(value).items()}
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc


def _build(cls: type, data: Mapping[str, Any], prefix: str = "") -> Any:
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(prefix + k for k in unknown))}")
    kwargs = {}
    for name, value in data.items():
        tp = known[name].type
        if tp == "ProviderSettings":
            kwargs[name] = _build(ProviderSettings, value or {}, f"{name}.")
        elif tp == "Ablation":
            kwargs[name] = _build(Ablation, value or {}, f"{name}.")
        else:
            kwargs[name] = _coerce(tp.replace(" | None", ""), value, prefix + name)
    return cls(**kwargs)


def from_mapping(data: Mapping[str, Any]) -> RunConfig:
    return _build(RunConfig, data)


def env_overrides(env: Mapping[str, str]) -> dict[str, Any]:
    """``CRYPTOTEAM_TEST_START=...`` sets ``test_start``; ``__`` separates nested keys."""
    out: dict[str, Any] = {}
    for key, value in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX) :].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return out


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> RunConfig:
    data: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            loaded = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        data = loaded
        # relative paths in the file resolve against the file's directory
        for key in ("data_dir", "runs_dir", "literature_dir", "fixtures_dir"):
            if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                data[key] = str(p.parent / data[key])
        prov = data.get("provider") or {}
        if prov.get("scripts"):
            prov["scripts"] = [s if Path(s).is_absolute() else str(p.parent / s) for s in prov["scripts"]]
    data = _merge(data, env_overrides(os.environ if env is None else env))
    return from_mapping(data)


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
