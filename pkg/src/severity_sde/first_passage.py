"""
Mean first-passage time to the harm threshold.

With a reflecting boundary at 0 and absorption at ``x_harm``, the mean
hitting time solves mu T' + (sigma^2 / 2) T'' = -1, T(x_harm) = 0,
T'(0) = 0, whose solution is

    T(x) = 2 int_x^{x_harm} exp(-Phi(y)) int_0^y exp(Phi(z)) / sigma(z)^2 dz dy

with Phi(y) = 2 int_0^y mu / sigma^2. Both integrals are accumulated in the
log domain; on each panel the log-integrand is interpolated linearly (the
trapezoid rule applied to the logarithm), which integrates the exponential
factors exactly when Phi is locally linear.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import ValidationError
from .model import ModelParams, diffusion, log_scale
from .sde import BLOCK_STEPS, CHUNK_SIZE, SimConfig, _chunks, noise_generator

DEFAULT_N_NODES = 1024
# exp() overflows past this
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class FirstPassageSpec:
    x_harm: float
    x_start: float = 0.0
    t_max: float = 1e4

    def __post_init__(self):
        x_harm, x_start, t_max = float(self.x_harm), float(self.x_start), float(self.t_max)
        if not 0.0 < x_harm < 1.0:
            raise ValidationError("x_harm", f"must lie in (0, 1) (got {x_harm!r})")
        if not 0.0 <= x_start < x_harm:
            raise ValidationError("x_start", f"must satisfy 0 <= x_start < x_harm (got {x_start!r})")
        if not (t_max > 0 and math.isfinite(t_max)):
            raise ValidationError("t_max", f"must be a positive finite real (got {t_max!r})")
        object.__setattr__(self, "x_harm", x_harm)
        object.__setattr__(self, "x_start", x_start)
        object.__setattr__(self, "t_max", t_max)


@dataclass
class FptResult:
    """Monte Carlo passage statistics.

    ``mean_fpt`` averages the uncensored hits only and is None when every
    path was censored; with any censoring it is biased low.
    """

    mean_fpt: float | None
    n_samples: int
    n_censored: int
    std_error: float
    hit_times: np.ndarray = None

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / self.n_samples

    @property
    def crossing_fraction(self) -> float:
        return 1.0 - self.censored_fraction

    @property
    def biased_low(self) -> bool:
        return self.n_censored > 0 and self.mean_fpt is not None


def _log_exprel(d):
    """log((exp(d) - 1) / d), finite for every finite d."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    small = np.abs(d) < 1e-8
    out[small] = 0.5 * d[small]
    pos = (d > 0) & ~small
    neg = (d < 0) & ~small
    out[pos] = d[pos] + np.log(-np.expm1(-d[pos])) - np.log(d[pos])
    out[neg] = np.log(-np.expm1(d[neg])) - np.log(-d[neg])
    return out


def _log_panels(y, logf):
    """Log of int_{y_k}^{y_{k+1}} f for each panel, f log-linear in between."""
    h = np.diff(y)
    l0, l1 = logf[:-1], logf[1:]
    out = np.full(h.shape, -np.inf)
    finite = np.isfinite(l0) & np.isfinite(l1)
    out[finite] = l0[finite] + np.log(h[finite]) + _log_exprel(l1[finite] - l0[finite])
    # a -inf end (an integral that starts at zero): plain trapezoid
    edge = ~finite
    if np.any(edge):
        out[edge] = np.log(0.5 * h[edge]) + np.logaddexp(l0[edge], l1[edge])
    return out


def _nodes(x_start: float, x_harm: float, n_nodes: int) -> tuple:
    upper = np.linspace(x_start, x_harm, n_nodes)
    if x_start <= 0.0:
        return upper, 0
    lower = np.linspace(0.0, x_start, n_nodes)
    return np.concatenate([lower, upper[1:]]), n_nodes - 1


def _log_mfpt_from(p: ModelParams, x_start: float, x_harm: float, n_nodes: int) -> float:
    if x_start >= x_harm:
        return -math.inf
    y, i0 = _nodes(x_start, x_harm, n_nodes)
    phi = log_scale(p, y)
    log_inner_f = phi - 2.0 * np.log(diffusion(p, y))
    log_inner = np.empty_like(y)
    log_inner[0] = -np.inf
    log_inner[1:] = np.logaddexp.accumulate(_log_panels(y, log_inner_f))
    log_outer_f = log_inner - phi
    return float(math.log(2.0) + logsumexp(_log_panels(y[i0:], log_outer_f[i0:])))


def _check_nodes(n_nodes):
    if n_nodes < 64:
        raise ValidationError("n_nodes", f"must be at least 64 (got {n_nodes!r})")


def log_mfpt_quadrature(p: ModelParams, spec: FirstPassageSpec, n_nodes: int = DEFAULT_N_NODES) -> float:
    """Natural log of the quadrature mean first-passage time."""
    _check_nodes(n_nodes)
    return _log_mfpt_from(p, spec.x_start, spec.x_harm, n_nodes)


def mfpt_quadrature(p: ModelParams, spec: FirstPassageSpec, n_nodes: int = DEFAULT_N_NODES) -> float:
    """Mean first-passage time T(x_start) by nested log-domain quadrature.

    Returns ``math.inf`` when T exceeds the float range; the finite
    log-scale value is available from :func:`log_mfpt_quadrature`.
    """
    log_t = log_mfpt_quadrature(p, spec, n_nodes)
    return math.exp(log_t) if log_t < LOG_FLOAT_MAX else math.inf


def mfpt_profile(p: ModelParams, x_harm: float, xs, n_nodes: int = DEFAULT_N_NODES) -> np.ndarray:
    """T(x) for each start point x in [0, x_harm]; T(x_harm) = 0."""
    _check_nodes(n_nodes)
    if not 0.0 < x_harm < 1.0:
        raise ValidationError("x_harm", "must lie in (0, 1)")
    out = []
    for x in np.atleast_1d(np.asarray(xs, dtype=float)):
        if not 0.0 <= x <= x_harm:
            raise ValidationError("x_start", f"must lie in [0, x_harm] (got {x!r})")
        log_t = _log_mfpt_from(p, float(x), x_harm, n_nodes)
        out.append(math.exp(log_t) if log_t < LOG_FLOAT_MAX else math.inf)
    return np.array(out)


def _passage_chunk(p: ModelParams, spec: FirstPassageSpec, cfg: SimConfig, max_step: int, first: int, count: int):
    gens = [noise_generator(cfg.seed + first + i) for i in range(count)]
    x = np.full(count, spec.x_start)
    hit = np.full(count, -1, dtype=np.int64)
    eta = np.empty((count, BLOCK_STEPS))
    step0 = 0
    while step0 < max_step:
        live = np.flatnonzero(hit < 0)
        if live.size == 0:
            break
        # only live paths consume noise, each from its own stream
        for i in live:
            gens[i].standard_normal(out=eta[i])
        _kernels.passage_block(x, eta, *p.coefficients, cfg.dt, spec.x_harm, step0, max_step, hit)
        step0 += BLOCK_STEPS
    return hit


def mfpt_monte_carlo(p: ModelParams, spec: FirstPassageSpec, cfg: SimConfig, threads: int = 1) -> FptResult:
    """Empirical first-passage times of ``cfg.n_traj`` paths started at x_start.

    A path is absorbed on the first step k whose raw update reaches x_harm
    and is assigned the hit time k * dt; paths still alive at ``spec.t_max``
    are censored. ``cfg.x0`` and ``cfg.n_steps`` are ignored.
    """
    max_step = int(math.floor(spec.t_max / cfg.dt + 1e-9))
    chunks = _chunks(cfg.n_traj, CHUNK_SIZE)
    run = lambda c: _passage_chunk(p, spec, cfg, max_step, *c)  # noqa: E731
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    hit = np.concatenate(parts)
    hits = hit[hit >= 0] * cfg.dt
    n = hit.size
    n_censored = int(n - hits.size)
    if hits.size == 0:
        return FptResult(None, n, n_censored, math.nan, hits)
    std_error = float(hits.std(ddof=1) / math.sqrt(hits.size)) if hits.size > 1 else math.nan
    return FptResult(float(hits.mean()), n, n_censored, std_error, hits)


def result_record(p: ModelParams, spec: FirstPassageSpec, method: str, mean_fpt, std_error=0.0,
                  n_samples=0, n_censored=0, **extra) -> dict:
    """JSON-ready record for either estimator."""
    if mean_fpt is not None and not math.isfinite(mean_fpt):
        mean_fpt = None
    rec = {
        "mean_fpt": mean_fpt,
        "std_error": None if std_error is None or not math.isfinite(std_error) else std_error,
        "n_samples": int(n_samples),
        "n_censored": int(n_censored),
        "method": method,
        "params": p.as_dict(),
        "x_harm": spec.x_harm,
        "x_start": spec.x_start,
        "t_max": spec.t_max,
    }
    rec.update(extra)
    return rec


def dumps_records(records) -> str:
    return json.dumps({"results": records}, indent=2, sort_keys=True) + "\n"
