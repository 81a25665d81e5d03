"""JSON experiment configuration.

A config file is one JSON object.  Every block is optional and falls back
to the desk-scale defaults below; unknown keys are rejected.

    {
      "schema_version": 1,
      "geometry":  {NetworkGeometry fields},
      "episode":   {EpisodeConfig fields},
      "agent":     {AgentConfig fields},
      "training":  {"steps", "modes", "record_wall_time"},
      "sweep":     {"parameter", "values", "draws", "rho", "beta", "backend"},
      "benchmark": {"M", "sizes", "trials", "warmup", "checkpoint", "rho", "beta"},
      "verify":    {"instances", "mc_samples", "beta", "rho", "train_steps"},
      "seeds":     [0, 1, 2, 3, 4],
      "output_dir": "runs"
    }
"""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field

from .agent import AgentConfig
from .channel import NetworkGeometry
from .env import EpisodeConfig
from .training import MODES

SCHEMA_VERSION = 1
SWEEP_PARAMETERS = ("gamma1", "N", "beta")

__all__ = [
    "ConfigError",
    "TrainingSettings",
    "SweepSettings",
    "BenchmarkSettings",
    "VerifySettings",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "SCHEMA_VERSION",
]


class ConfigError(ValueError):
    pass


@dataclass
class TrainingSettings:
    steps: int = 20000
    modes: tuple = MODES
    record_wall_time: bool = False

    def __post_init__(self):
        self.modes = tuple(self.modes)
        if self.steps < 1:
            raise ValueError("steps must be positive")
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise ValueError(f"modes must be a nonempty subset of {list(MODES)}, got {list(self.modes)}")


@dataclass
class SweepSettings:
    parameter: str = "gamma1"
    values: tuple = (2.0, 4.0, 8.0)
    draws: int = 50
    rho: float = 0.5
    beta: float = 0.01
    backend: str = "cvxopt"

    def __post_init__(self):
        self.values = tuple(self.values)
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"sweep parameter must be one of {list(SWEEP_PARAMETERS)}, got {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if self.draws < 1:
            raise ValueError("draws must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


@dataclass
class BenchmarkSettings:
    M: int = 4
    sizes: tuple = (40, 60, 80, 100, 200)
    trials: int = 20
    warmup: int = 3
    checkpoint: str | None = None
    rho: float = 0.5
    beta: float = 0.01

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.trials < 1 or self.warmup < 0:
            raise ValueError("need trials >= 1 and warmup >= 0")
        for s in self.sizes:
            if s % self.M:
                raise ValueError(f"size {s} is not a multiple of M={self.M}")


@dataclass
class VerifySettings:
    instances: int = 5
    mc_samples: int = 1000
    beta: float = 0.01
    # high enough that the energy constraint binds and its LMI is exercised
    rho: float = 0.9
    train_steps: int = 200
    action_samples: int = 10000


@dataclass
class ExperimentConfig:
    geometry: NetworkGeometry = field(default_factory=NetworkGeometry)
    episode: EpisodeConfig = field(default_factory=lambda: EpisodeConfig(
        T=4, steps_per_episode=1000, channel_mode="gauss-markov", correlation=0.99, k_factor=10.0))
    agent: AgentConfig = field(default_factory=lambda: AgentConfig(p_max=1e4, opt_every=3, dtype="float32"))
    training: TrainingSettings = field(default_factory=TrainingSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "runs"

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must be nonempty")

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(dataclasses.asdict(self))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=list)

    def with_updates(self, **blocks) -> "ExperimentConfig":
        """Copy with some block fields replaced, e.g. ``with_updates(training={"steps": 10})``."""
        raw = json.loads(self.to_json())
        for name, upd in blocks.items():
            if isinstance(upd, dict):
                raw[name].update(upd)
            else:
                raw[name] = upd
        return parse_config(raw)


_BLOCKS = {
    "geometry": NetworkGeometry,
    "episode": EpisodeConfig,
    "agent": AgentConfig,
    "training": TrainingSettings,
    "sweep": SweepSettings,
    "benchmark": BenchmarkSettings,
    "verify": VerifySettings,
}


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _where(source, text, key):
    line = _line_of(text, key.split(".")[-1])
    loc = source if line is None else f"{source}:{line}"
    return f"{loc}: key '{key}'"


def parse_config(raw: dict, source: str = "<config>", text: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{_where(source, text, 'schema_version')}: unsupported version {version!r}")
    defaults = ExperimentConfig()
    kwargs = {}
    for key, value in raw.items():
        if key == "schema_version":
            continue
        if key in _BLOCKS:
            cls = _BLOCKS[key]
            if not isinstance(value, dict):
                raise ConfigError(f"{_where(source, text, key)}: expected an object")
            known = {f.name for f in dataclasses.fields(cls)}
            for sub in value:
                if sub not in known:
                    raise ConfigError(f"{_where(source, text, key + '.' + sub)}: unknown key "
                                      f"(allowed: {', '.join(sorted(known))})")
            base = dataclasses.asdict(getattr(defaults, key))
            base.update(value)
            try:
                kwargs[key] = cls(**base)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{_where(source, text, key)}: {exc}") from None
        elif key == "seeds":
            if not isinstance(value, list) or not all(isinstance(s, int) for s in value) or not value:
                raise ConfigError(f"{_where(source, text, key)}: expected a nonempty list of integers")
            kwargs[key] = tuple(value)
        elif key == "output_dir":
            if not isinstance(value, str):
                raise ConfigError(f"{_where(source, text, key)}: expected a string")
            kwargs[key] = value
        else:
            raise ConfigError(f"{_where(source, text, key)}: unknown key")
    for key in _BLOCKS:
        kwargs.setdefault(key, getattr(defaults, key))
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file; errors name the file, line and key."""
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return parse_config(raw, path, text)
