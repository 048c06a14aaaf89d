"""Versioned experiment configuration stored as YAML."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

CONFIG_VERSION = 2

SCENARIOS = (
    "equilibrium2d",
    "smalldata-decay",
    "relaxationless-det",
    "lagrangian-crosscheck",
    "blowup1d-riccati",
    "cone-invariance",
    "regularized-trace",
    "calderon-monitor",
)


class ConfigError(ValueError):
    pass


@dataclass
class ParamsSpec:
    k: float = 1.0
    epsilon: float = 1.0
    R: float = 1.0
    corotational: bool = False


@dataclass
class InitialSpec:
    family: str = "random"
    amplitude: float = 0.1
    modes: int = 4
    mean: float = 1.0
    snapshot: str | None = None


@dataclass
class ExperimentConfig:
    scenario: str = "equilibrium2d"
    version: int = CONFIG_VERSION
    n: int = 64
    dt: float = 0.01
    t_end: float = 1.0
    params: ParamsSpec = field(default_factory=ParamsSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    monitors: list[str] = field(default_factory=lambda: ["default"])
    output_dir: str | None = None
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def hashable(self) -> dict:
        """Everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        return d


_NESTED = {"params": ParamsSpec, "initial": InitialSpec}


def _check_keys(d: dict, cls, where: str):
    allowed = {f.name for f in fields(cls)}
    bad = sorted(set(d) - allowed)
    if bad:
        raise ConfigError(f"unknown keys in {where}: {', '.join(bad)}")


def _migrate(d: dict) -> dict:
    """Bring older layouts to the current version with defaults applied."""
    v = d.get("version", 1)
    if v > CONFIG_VERSION:
        raise ConfigError(f"config version {v} is newer than supported version {CONFIG_VERSION}")
    d = copy.deepcopy(d)
    if v == 1:
        # version 1 kept scenario knobs under "extra" and had no tolerance table
        if "extra" in d:
            d["options"] = d.pop("extra")
    d["version"] = CONFIG_VERSION
    return d


_SCALARS = {"float": float, "int": int, "bool": bool}


def _coerce(d: dict, cls) -> dict:
    """Cast scalar fields to their declared types.

    YAML 1.1 reads '5e-4' as a string, and an integer may stand for a float.
    """
    types = {f.name: f.type for f in fields(cls)}
    out = dict(d)
    for k, v in d.items():
        cast = _SCALARS.get(str(types.get(k)))
        if cast is None or v is None or isinstance(v, bool) and cast is not bool:
            continue
        try:
            if cast is bool:
                if not isinstance(v, bool):
                    raise ValueError
            elif cast is int:
                if float(v) != int(float(v)):
                    raise ValueError
                out[k] = int(float(v))
            else:
                out[k] = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{k} must be of type {cast.__name__}, got {v!r}") from None
    return out


def config_from_dict(d: dict | None) -> ExperimentConfig:
    d = _migrate(dict(d or {}))
    _check_keys(d, ExperimentConfig, "config")
    kw = {}
    for name, val in d.items():
        if name in _NESTED:
            if not isinstance(val, dict):
                raise ConfigError(f"{name} must be a mapping")
            _check_keys(val, _NESTED[name], name)
            kw[name] = _NESTED[name](**_coerce(val, _NESTED[name]))
        else:
            kw[name] = val
    cfg = ExperimentConfig(**_coerce(kw, ExperimentConfig))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}")
    if cfg.n < 8 or cfg.n & (cfg.n - 1):
        raise ConfigError("n must be a power of two >= 8")
    if cfg.dt <= 0 or cfg.t_end < 0:
        raise ConfigError("dt must be positive and t_end nonnegative")
    if cfg.params.k < 0 or cfg.params.epsilon < 0 or cfg.params.R <= 0:
        raise ConfigError("params need k >= 0, epsilon >= 0, R > 0")
    if not isinstance(cfg.tolerances, dict) or not isinstance(cfg.options, dict):
        raise ConfigError("tolerances and options must be mappings")


def load_config(path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply 'dotted.key=value' overrides; values are parsed as YAML scalars."""
    d = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown override key {key!r}")
            node = node[p]
        if parts[-1] not in node and parts[0] not in ("options", "tolerances"):
            raise ConfigError(f"unknown override key {key!r}")
        node[parts[-1]] = yaml.safe_load(raw)
    return config_from_dict(d)


# Presets sized to run in seconds; acceptance-scale settings live in the tests.
PRESETS: dict[str, dict] = {
    "equilibrium2d": dict(n=32, dt=0.01, t_end=0.2, params=dict(k=1.0, epsilon=0.5), initial=dict(family="equilibrium", mean=1.0)),
    "smalldata-decay": dict(
        n=32, dt=0.01, t_end=4.0, params=dict(k=1.0, epsilon=1.0),
        initial=dict(family="random", amplitude=0.01, modes=3, mean=0.02),
    ),
    "relaxationless-det": dict(
        n=64, dt=0.005, t_end=0.5, params=dict(k=1.0, epsilon=0.0),
        initial=dict(family="random", amplitude=0.3, modes=4, mean=1.0),
    ),
    "lagrangian-crosscheck": dict(
        n=64, dt=1e-3, t_end=0.1, params=dict(k=1.0, epsilon=0.5),
        initial=dict(family="poisson", amplitude=0.3, mean=1.0), options=dict(particles=64),
    ),
    "blowup1d-riccati": dict(
        n=128, dt=5e-4, t_end=2.5, params=dict(k=1.0, epsilon=0.0),
        initial=dict(family="vanishing", amplitude=1.0), options=dict(record_every=10),
    ),
    "cone-invariance": dict(
        n=16, dt=0.01, t_end=10.0, initial=dict(family="random", modes=6, mean=1.0),
        options=dict(gamma=1.0, trials=10, weight=1.0),
    ),
    "regularized-trace": dict(
        n=32, dt=0.005, t_end=1.0, params=dict(k=1.0, epsilon=0.5),
        initial=dict(family="random", amplitude=1.0, modes=3, mean=1.0), options=dict(kappa=0.5, C0=1.5),
    ),
    "calderon-monitor": dict(
        n=32, dt=1.0, t_end=0.0, initial=dict(family="random", amplitude=1.0, modes=4),
        options=dict(family_size=8, alpha=0.5),
    ),
}


def preset(scenario: str) -> ExperimentConfig:
    if scenario not in PRESETS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    d = copy.deepcopy(PRESETS[scenario])
    d["scenario"] = scenario
    return config_from_dict(d)
