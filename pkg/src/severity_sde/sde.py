"""
Euler-Maruyama integration of the severity SDE on [0, 1].

Both boundaries reflect: a raw update y < 0 maps to -y and y > 1 maps to
2 - y, repeatedly, until the value is back in range.

Noise
-----
Trajectory ``i`` of an ensemble with base seed ``s`` draws its standard
normals from ``numpy.random.Generator(numpy.random.Philox(key=s + i))``
(Philox4x32-10, counter based; normals by numpy's ziggurat sampler), in
step order. The stream of a trajectory therefore depends only on its own
seed, which makes ensembles independent of chunking and thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .model import ModelParams, check_severity, diffusion, drift

DEFAULT_DT = 0.01
SEED_LIMIT = 2**64
# steps per noise draw; bounds memory at chunk_size * BLOCK_STEPS doubles
BLOCK_STEPS = 2048
CHUNK_SIZE = 256


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    n_steps: int = 1000
    x0: float = 0.1
    seed: int = 0
    n_traj: int = 1
    record_stride: int = 1

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt", f"must be a positive finite real (got {self.dt!r})")
        for name, low in (("n_steps", 1), ("n_traj", 1), ("record_stride", 1), ("seed", 0)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(name, f"must be an integer (got {value!r})")
            if value < low:
                raise ValidationError(name, f"must be >= {low} (got {value!r})")
        if self.seed + self.n_traj > SEED_LIMIT:
            raise ValidationError("seed", "seed + n_traj must fit in 64 bits")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "x0", check_severity(self.x0, "x0"))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    def replace(self, **changes) -> "SimConfig":
        values = dict(self.__dict__)
        values.update(changes)
        return SimConfig(**values)


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    seed: int
    params: ModelParams


@dataclass
class Ensemble:
    """Trajectories sharing one config; row ``i`` was seeded ``base_seed + i``."""

    times: np.ndarray
    values: np.ndarray
    base_seed: int
    params: ModelParams
    config: SimConfig = field(repr=False)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(self.times, self.values[i], self.base_seed + i, self.params)

    @property
    def seeds(self) -> list:
        return [self.base_seed + i for i in range(len(self))]

    @property
    def trajectories(self) -> list:
        return [self[i] for i in range(len(self))]


def noise_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def reflect(y):
    """Fold values into [0, 1] by mirror reflection at both ends."""
    y = np.asarray(y, dtype=float)
    out = _kernels._reflect_array(y)
    return out if out.ndim else float(out)


def em_step(p: ModelParams, x, dt: float, eta):
    """One reflected Euler-Maruyama step: reflect(x + mu dt + sigma sqrt(dt) eta)."""
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    x = np.asarray(x, dtype=float)
    raw = x + drift(p, x) * dt + diffusion(p, x) * math.sqrt(dt) * np.asarray(eta, dtype=float)
    return reflect(raw)


def _fill_noise(gens, eta):
    for row, g in zip(eta, gens):
        g.standard_normal(out=row)


def _run_chunk(p: ModelParams, cfg: SimConfig, first: int, count: int) -> np.ndarray:
    gens = [noise_generator(cfg.seed + first + i) for i in range(count)]
    rec = np.empty((count, cfg.n_records))
    rec[:, 0] = cfg.x0
    x = np.full(count, cfg.x0)
    stride = cfg.record_stride
    block = max(stride, (BLOCK_STEPS // stride) * stride)
    eta = np.empty((count, block))
    done, col = 0, 1
    while done < cfg.n_steps:
        m = min(block, cfg.n_steps - done)
        eta_view = eta[:, :m]
        _fill_noise(gens, eta_view)
        n_rec = m // stride
        out = rec[:, col:col + n_rec]
        _kernels.em_block(x, eta_view, *p.coefficients, cfg.dt, stride, out)
        col += n_rec
        done += m
    return rec


def _chunks(n: int, size: int):
    return [(start, min(size, n - start)) for start in range(0, n, size)]


def simulate_ensemble(p: ModelParams, cfg: SimConfig, threads: int = 1) -> Ensemble:
    """Run ``cfg.n_traj`` independent trajectories.

    ``threads`` only changes scheduling; the result is bit-identical for any
    value.
    """
    chunks = _chunks(cfg.n_traj, CHUNK_SIZE)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(p, cfg, *c), chunks))
    else:
        parts = [_run_chunk(p, cfg, *c) for c in chunks]
    values = np.concatenate(parts, axis=0)
    times = np.arange(cfg.n_records) * (cfg.dt * cfg.record_stride)
    return Ensemble(times, values, cfg.seed, p, cfg)


def simulate_trajectory(p: ModelParams, cfg: SimConfig) -> Trajectory:
    """Single trajectory seeded by ``cfg.seed`` (``cfg.n_traj`` is ignored)."""
    ens = simulate_ensemble(p, cfg.replace(n_traj=1))
    return ens[0]
