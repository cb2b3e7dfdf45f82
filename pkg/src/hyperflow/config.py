"""Flat key-value run configuration."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

DEFAULTS: dict[str, Any] = {
    "seed": None,
    "output": "runs/default",
    "data.source": "karate",
    "data.edges": None,
    "data.features": None,
    "data.feature_header": False,
    "data.hyperedges": None,
    "planted.cliques": 2,
    "planted.size": 8,
    "planted.inter_p": 0.05,
    "planted.noise": 0.1,
    "env.method": "learned",
    "env.C": 4,
    "env.tau": 0.5,
    "env.hidden": 64,
    "env.neg_ratio": 5,
    "env.epochs": 200,
    "env.lr": 0.01,
    "env.k": 1,
    "line.max_len": 4,
    "line.repeats": 10,
    "line.samples": None,
    "model.hyper_dims": [16, 16],
    "model.pair_dims": [16, 16],
    "model.K": 2,
    "model.gamma": 0.5,
    "model.activation": "relu",
    "train.m_p": 0.1,
    "train.m_n": 1.0,
    "train.neg_ratio": 10,
    "train.epochs": 200,
    "train.lr": 0.01,
    "train.optimizer": "adam",
    "train.mode": "pluggable",
    "train.task": None,
    "train.lambda": 1.0,
    "train.task_neg_ratio": 5,
    "train.joint": False,
    "train.resample_negatives": True,
    "eval.test_fraction": 0.2,
    "eval.neg_per_pos": 10,
    "metrics.rho": 0.5,
    "metrics.samples": 10_000,
    "metrics.entropy_mode": "sum",
    "metrics.embedding": "full",
    "metrics.snapshot_every": 20,
    "report.figures": True,
}

# keys that change where or how results are written, not what is computed
NON_SEMANTIC = frozenset({"output", "report.figures"})

CHOICES = {
    "data.source": {"karate", "planted", "files"},
    "env.method": {"learned", "cluster", "community", "khop", "file"},
    "model.activation": {"relu", "sigmoid", "identity"},
    "train.optimizer": {"adam", "sgd"},
    "train.mode": {"pluggable", "unpluggable"},
    "train.task": {None, "link_prediction", "rating_regression"},
    "metrics.entropy_mode": {"sum", "mean"},
    "metrics.embedding": {"full", "encode", "star"},
}

PATH_KEYS = ("data.edges", "data.features", "data.hyperedges")


class ConfigError(ValueError):
    pass


def parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if value is None or default is None:
        return value
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(value)
                return value.lower() in ("true", "1")
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [int(x) for x in value.split(",") if x]
            return [int(x) for x in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {type(default).__name__}") from None
    return value


def make_config(overrides: dict[str, Any] | None = None, check_paths: bool = True
                ) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, value)
    validate(cfg, check_paths)
    return cfg


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None,
                check_paths: bool = True) -> dict[str, Any]:
    """File values first, then ``overrides`` (CLI flags) on top."""
    merged: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        merged.update(data)
    merged.update(overrides or {})
    return make_config(merged, check_paths)


def validate(cfg: dict[str, Any], check_paths: bool = True) -> None:
    if cfg["seed"] is None:
        raise ConfigError("seed is mandatory")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    for key, allowed in CHOICES.items():
        if cfg[key] not in allowed:
            raise ConfigError(f"{key} must be one of {sorted(map(str, allowed))}")
    if not cfg["train.m_n"] > cfg["train.m_p"] >= 0:
        raise ConfigError("margins must satisfy train.m_n > train.m_p >= 0")
    if cfg["train.neg_ratio"] < 1:
        raise ConfigError("train.neg_ratio must be >= 1")
    if not 0.0 < cfg["env.tau"] < 1.0:
        raise ConfigError("env.tau must lie in (0, 1)")
    if not 0.0 <= cfg["model.gamma"] <= 1.0:
        raise ConfigError("model.gamma must lie in [0, 1]")
    if cfg["model.K"] < 1:
        raise ConfigError("model.K must be >= 1")
    if not cfg["model.hyper_dims"] or not cfg["model.pair_dims"]:
        raise ConfigError("at least one layer per encoder branch is required")
    if cfg["train.mode"] == "unpluggable" and cfg["train.task"] is None:
        raise ConfigError("unpluggable mode needs train.task")
    if cfg["data.source"] == "files" and not cfg["data.edges"]:
        raise ConfigError("data.source=files needs data.edges")
    if cfg["env.method"] == "file" and not cfg["data.hyperedges"]:
        raise ConfigError("env.method=file needs data.hyperedges")
    if check_paths:
        for key in PATH_KEYS:
            if cfg[key] and not Path(cfg[key]).exists():
                raise ConfigError(f"{key}: path {cfg[key]} does not exist")


def semantic_items(cfg: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in sorted(cfg.items()) if k not in NON_SEMANTIC}


def config_hash(cfg: dict[str, Any]) -> str:
    blob = json.dumps(semantic_items(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
