"""Layered run configuration.

Resolution order, later layers winning: built-in defaults, the JSON config
file, ``QDC_*`` environment variables, suite-entry deltas, command-line flags.
Environment variables map to dotted keys with ``__`` as the separator, e.g.
``QDC_SYNTH__RESTARTS=5`` sets ``synth.restarts`` and ``QDC_SEED=3`` sets ``seed``.
Values are parsed as JSON when possible and kept as strings otherwise.
"""
from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path
from typing import Any, Mapping, Optional

from .records import is_record

ENV_PREFIX = "QDC_"


class ConfigError(ValueError):
    """Invalid, unreadable or inconsistent configuration."""


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "serial": False,
    "system": {"n": 2, "d": 2},
    "bounds": {"n_min": 2, "n_max": 4, "d_min": 2, "d_max": 4},
    "target": {
        "source": "random",  # random | cz | file
        "kind": "unitary",
        "seed": None,  # None -> master seed
        "randomization_steps": 1000,
        "path": None,
    },
    "synth": {
        "search": "exhaustive",
        "trials": 100,
        "restarts": 20,
        "max_iterations": 5000,
        "success_threshold": 1 - 1e-9,
        "init_range": math.pi,
        "seed": None,
        "n_start": None,  # None -> lower bound
        "n_cap": 64,
    },
    "model": {
        "scale": 1.0,
        "frame": "rotating",
        "policy": "one_step",
        "g": None,
        "omegas": None,
        "etas": None,
        "quadratures": None,
    },
    "grape": {
        "T": 1.0,  # units of T_CZ2
        "slices": None,
        "restarts": 5,
        "max_iterations": 1000,
        "init_scale": 0.5,
        "a_max": None,
        "seed": None,
    },
    "sweep": {"t_start": 0.2, "ratio": 1.1, "t_max": 4.0, "threshold": 0.999},
    "speed": {"epsilon": 0.1, "base": "identity", "hbar": None, "tol": 1e-9},
    "controllability": {"tol": 1e-9},
}

GLOBAL_KEYS = ("seed", "workers", "serial")

SECTIONS: dict[str, tuple[str, ...]] = {
    "bounds": ("bounds",),
    "gen-target": ("system", "target"),
    "synth-search": ("system", "target", "synth"),
    "grape": ("system", "target", "model", "grape"),
    "min-time": ("system", "target", "model", "grape", "sweep"),
    "speed-est": ("system", "target", "model", "speed"),
    "controllability": ("system", "model", "controllability"),
}


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(cfg: dict, dotted: str, value: Any):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def merge(base: dict, delta: Mapping, where: str = "") -> dict:
    """Deep-merge ``delta`` into a copy of ``base``; unknown keys are errors."""
    out = copy.deepcopy(base)
    for k, v in delta.items():
        path = f"{where}.{k}" if where else k
        if k not in out:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(out[k], dict):
            if not isinstance(v, Mapping):
                raise ConfigError(f"config key {path!r} must be an object")
            out[k] = merge(out[k], v, path)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_config_file(path: str | Path) -> dict:
    """Config object from a JSON file; a run record yields its recorded config."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if is_record(data):
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return data


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for key, val in sorted(environ.items()):
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower().replace("__", ".")] = parse_value(val)
    return out


def resolve(file_cfg: Optional[dict] = None, env: Optional[Mapping[str, Any]] = None,
            delta: Optional[dict] = None, flags: Optional[Mapping[str, Any]] = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if file_cfg:
        cfg = merge(cfg, file_cfg)
    for dotted, v in (env or {}).items():
        set_path(cfg, dotted, v)
    if delta:
        cfg = merge(cfg, delta)
    for dotted, v in (flags or {}).items():
        set_path(cfg, dotted, v)
    return cfg


def restrict(cfg: dict, subcommand: str) -> dict:
    """Keep the global keys plus the sections the subcommand reads."""
    out = {k: cfg[k] for k in GLOBAL_KEYS}
    for s in SECTIONS[subcommand]:
        out[s] = cfg[s]
    return out


def _typed(value: Any, kind: type, key: str, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key} must be a finite number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    raise TypeError(kind)


def check_types(cfg: dict) -> dict:
    """Coerce scalar fields to the types of their defaults (None-defaults are checked later)."""
    out = copy.deepcopy(cfg)

    def walk(node: dict, ref: dict, where: str):
        for k, v in node.items():
            r = ref[k]
            path = f"{where}.{k}" if where else k
            if isinstance(r, dict):
                walk(v, r, path)
            elif r is not None:
                node[k] = _typed(v, type(r), path)

    walk(out, DEFAULTS, "")
    if out["seed"] < 0 or out["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if out["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return out


def optional(value: Any, kind: type, key: str):
    return _typed(value, kind, key, allow_none=True)
