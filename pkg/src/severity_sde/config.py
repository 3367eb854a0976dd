"""
JSON run configuration shared by every CLI subcommand.

Layout (all sections except ``model`` optional)::

    {
      "model":   {"alpha": .., "beta": .., "gamma": .., "sigma0": .., "sigma1": ..},
      "sim":     {"dt": 0.01, "n_steps": 1000, "x0": 0.1, "seed": 0, "n_traj": 1, "record_stride": 1},
      "grid":    {"n_cells": 2000, "dt": 0.1, "n_steps": 1000, "x_init": null},
      "passage": {"x_harm": 0.7, "x_start": 0.1, "t_max": 1e4, "horizon": null,
                  "n_nodes": 1024, "method": "both"},
      "sweep":   {"alpha_grid": [..], "beta_grid": [..]},
      "scaling": {"beta": 0.45, "deltas": [..]},
      "fit":     {"data": "path.csv", "max_iter": 5000, "tol": 1e-10, "init": null},
      "output_dir": "out"
    }

Errors carry the dotted path of the first offending field.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ValidationError
from .first_passage import FirstPassageSpec
from .model import ModelParams
from .sde import SimConfig


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class GridConfig:
    n_cells: int = 2000
    dt: float = 0.1
    n_steps: int = 1000
    x_init: float | None = None

    def __post_init__(self):
        _int_at_least(self, "n_cells", 16)
        _int_at_least(self, "n_steps", 1)
        _positive(self, "dt")
        if self.x_init is not None and not 0.0 <= self.x_init <= 1.0:
            raise ValidationError("x_init", "must lie in [0, 1]")


@dataclass(frozen=True)
class PassageConfig:
    x_harm: float = 0.7
    x_start: float = 0.1
    t_max: float = 1e4
    horizon: float | None = None
    n_nodes: int = 1024
    method: str = "both"

    def __post_init__(self):
        FirstPassageSpec(self.x_harm, self.x_start, self.t_max)
        if self.horizon is not None:
            _positive(self, "horizon")
        _int_at_least(self, "n_nodes", 64)
        if self.method not in ("quadrature", "monte_carlo", "both"):
            raise ValidationError("method", "must be 'quadrature', 'monte_carlo' or 'both'")

    @property
    def spec(self) -> FirstPassageSpec:
        return FirstPassageSpec(self.x_harm, self.x_start, self.t_max)


@dataclass(frozen=True)
class SweepConfig:
    alpha_grid: tuple = ()
    beta_grid: tuple = ()

    def __post_init__(self):
        for name in ("alpha_grid", "beta_grid"):
            _ascending(self, name)


@dataclass(frozen=True)
class ScalingConfig:
    beta: float = 0.45
    deltas: tuple = (0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16)

    def __post_init__(self):
        if not (_is_real(self.beta) and self.beta >= 0):
            raise ValidationError("beta", "must be a nonnegative real")
        d = self.deltas
        if not isinstance(d, (list, tuple)) or len(d) < 4 or not all(_is_real(v) and v != 0 for v in d):
            raise ValidationError("deltas", "must list at least 4 nonzero reals")
        if any(self.beta + v < 0 for v in d):
            raise ValidationError("deltas", "beta + delta must be nonnegative")
        object.__setattr__(self, "deltas", tuple(float(v) for v in d))


@dataclass(frozen=True)
class FitConfig:
    data: str | None = None
    max_iter: int = 5000
    tol: float = 1e-10
    init: dict | None = None

    def __post_init__(self):
        _int_at_least(self, "max_iter", 1)
        _positive(self, "tol")
        if self.init is not None:
            if not isinstance(self.init, dict):
                raise ValidationError("init", "must be an object of model parameters")
            try:
                ModelParams(**self.init)
            except TypeError as exc:
                raise ValidationError("init", str(exc)) from None
            except ValidationError as exc:
                raise exc.prefixed("init") from None


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    sim: SimConfig = field(default_factory=SimConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    passage: PassageConfig = field(default_factory=PassageConfig)
    sweep: SweepConfig | None = None
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    output_dir: str = "."


_SECTIONS = {
    "model": ModelParams,
    "sim": SimConfig,
    "grid": GridConfig,
    "passage": PassageConfig,
    "sweep": SweepConfig,
    "scaling": ScalingConfig,
    "fit": FitConfig,
}


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(obj, name):
    v = getattr(obj, name)
    if not (_is_real(v) and v > 0):
        raise ValidationError(name, f"must be a positive finite real (got {v!r})")


def _int_at_least(obj, name, low):
    v = getattr(obj, name)
    if isinstance(v, bool) or not isinstance(v, int) or v < low:
        raise ValidationError(name, f"must be an integer >= {low} (got {v!r})")


def _ascending(obj, name):
    g = getattr(obj, name)
    if not isinstance(g, (list, tuple)) or not g or not all(_is_real(v) for v in g):
        raise ValidationError(name, "must be a nonempty list of reals")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValidationError(name, "must be strictly ascending")
    object.__setattr__(obj, name, tuple(float(v) for v in g))


def _build_section(name: str, raw):
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a JSON object")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    if cls is ModelParams:
        for key in sorted(known):
            if key not in raw:
                raise ConfigError(f"{name}.{key}", "required field missing")
    try:
        return cls(**raw)
    except ValidationError as exc:
        raise ConfigError(f"{name}.{exc.field}", exc.message) from None
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from None


def build_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in raw:
        if key not in _SECTIONS and key != "output_dir":
            raise ConfigError(key, "unknown section")
    if "model" not in raw:
        raise ConfigError("model", "required section missing")
    kwargs = {}
    for name in _SECTIONS:
        if name in raw and raw[name] is not None:
            kwargs[name] = _build_section(name, raw[name])
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str) or not raw["output_dir"]:
            raise ConfigError("output_dir", "must be a nonempty path string")
        kwargs["output_dir"] = raw["output_dir"]
    return RunConfig(**kwargs)


def parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Set dotted ``section.key`` paths (values already parsed) on a copy."""
    out = copy.deepcopy(raw)
    for path, value in overrides:
        parts = path.split(".")
        node = out
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigError(path, "cannot override inside a non-object field")
            node = child
        node[parts[-1]] = value
    return out


def load_raw(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"malformed JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def validate_config(path, overrides=()) -> RunConfig:
    """Parse and fully validate a config file; raises ConfigError naming the first bad field."""
    return build_config(apply_overrides(load_raw(path), overrides))
