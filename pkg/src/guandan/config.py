"""YAML-backed configuration for training runs and serving.

Top-level keys mirror RuntimeConfig fields; `dmc:` and `ppo:` blocks
mirror the trainer dataclasses.  Unknown keys are rejected so typos
don't silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses

import yaml

from .dmc import DmcConfig
from .ppo import PpoConfig
from .runtime import RuntimeConfig


class ConfigError(ValueError):
    pass


def _build(cls, data: dict, path: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key {path}{key!r}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RuntimeConfig:
    data = dict(data or {})
    dmc = _build(DmcConfig, data.pop("dmc", {}), "dmc.")
    ppo = _build(PpoConfig, data.pop("ppo", {}), "ppo.")
    cfg = _build(RuntimeConfig, data, "")
    cfg.dmc = dmc
    cfg.ppo = ppo
    return cfg


def load_config(path: str) -> RuntimeConfig:
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def dump_config(cfg: RuntimeConfig) -> str:
    data = dataclasses.asdict(cfg)
    for block in ("dmc", "ppo"):
        data[block] = {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in data[block].items()}
    data = {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in data.items()}
    return yaml.safe_dump(data, sort_keys=False)
