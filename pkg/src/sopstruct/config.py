"""JSON run configuration: client, datasets, pipeline settings.

Example::

    {
      "llm": {"endpoint": "https://host/v1/chat/completions", "model": "gpt-4", "temperature": 0},
      "datasets": [{"name": "recipes", "root_path": "data/recipes", "format": "text_dir", "limit": 5}],
      "pipeline": {"concurrency": 4, "recursion_threshold": 6000},
      "timestamp": null,
      "git_revision": null
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .harness import DatasetSpec, PipelineConfig
from .llm.client import LlmClientSpec


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    llm: LlmClientSpec | None = None
    datasets: list[DatasetSpec] = field(default_factory=list)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


def _build(cls, raw: Any, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: Any) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - {"llm", "datasets", "pipeline", "timestamp", "git_revision"})
    if unknown:
        raise ConfigError(f"unknown top-level keys {', '.join(unknown)}")
    llm = None
    if raw.get("llm") is not None:
        if not isinstance(raw["llm"], dict):
            raise ConfigError("llm: expected an object")
        try:
            llm = LlmClientSpec.from_dict(raw["llm"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"llm: {exc}") from None
    datasets = raw.get("datasets", [])
    if not isinstance(datasets, list):
        raise ConfigError("datasets: expected a list")
    specs = [_build(DatasetSpec, d, f"datasets[{i}]") for i, d in enumerate(datasets)]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("dataset names must be unique")
    pipe_raw = dict(raw.get("pipeline") or {})
    for key in ("timestamp", "git_revision"):
        if raw.get(key) is not None:
            pipe_raw.setdefault(key, raw[key])
    if llm is not None:
        pipe_raw.setdefault("model", llm.model)
    return RunConfig(llm, specs, _build(PipelineConfig, pipe_raw, "pipeline"))


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return config_from_dict(raw)
