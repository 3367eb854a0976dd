"""
Parameter calibration from observed severity increments.

Each increment dx over dt starting at x is treated as Normal(mu(x) dt,
sigma(x)^2 dt), the transition law of one Euler-Maruyama step. The fit
maximizes the resulting pseudo-likelihood over the box alpha, beta, gamma,
sigma1 >= 0, sigma0 >= 1e-6 by bounded Nelder-Mead (points are clipped
into the box), restarted from the incumbent until a restart no longer
improves the objective.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import ValidationError
from .model import ModelParams

SIGMA0_FLOOR = 1e-6
DEFAULT_INIT = ModelParams(alpha=0.1, beta=0.1, gamma=0.01, sigma0=0.05, sigma1=0.05)
_BOUNDS = [(0.0, None), (0.0, None), (0.0, None), (SIGMA0_FLOOR, None), (0.0, None)]


@dataclass
class IncrementDataset:
    x: np.ndarray
    dx: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float)
        self.dx = np.ascontiguousarray(self.dx, dtype=float)
        self.dt = np.ascontiguousarray(np.broadcast_to(np.asarray(self.dt, dtype=float), self.x.shape))
        if not (self.x.ndim == 1 and self.x.shape == self.dx.shape):
            raise ValidationError("pairs", "x, dx and dt must be 1-D arrays of equal length")
        if np.any((self.x < 0) | (self.x > 1)) or not np.all(np.isfinite(self.x)):
            raise ValidationError("x", "every x must lie in [0, 1]")
        if np.any(~(self.dt > 0)):
            raise ValidationError("dt", "every dt must be positive")
        end = self.x + self.dx
        if np.any((end < -1) | (end > 2)) or not np.all(np.isfinite(self.dx)):
            raise ValidationError("dx", "x + dx must lie in [-1, 2]")

    def __len__(self):
        return self.x.size

    @property
    def total_time(self) -> float:
        return float(self.dt.sum())

    def subset(self, index) -> "IncrementDataset":
        return IncrementDataset(self.x[index], self.dx[index], self.dt[index])

    @classmethod
    def concatenate(cls, parts) -> "IncrementDataset":
        parts = list(parts)
        return cls(np.concatenate([p.x for p in parts]),
                   np.concatenate([p.dx for p in parts]),
                   np.concatenate([p.dt for p in parts]))


def _sigma_ceiling(x, dx, dt, n_bins=20, min_count=30) -> float:
    """Largest binned RMS increment scale sqrt(E[dx^2] / dt)."""
    scale = dx**2 / dt
    bins = np.minimum((x * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(bins, minlength=n_bins)
    sums = np.bincount(bins, weights=scale, minlength=n_bins)
    ok = counts >= min_count
    if not ok.any():
        return float(np.sqrt(scale.mean()))
    return float(np.sqrt((sums[ok] / counts[ok]).max()))


def increments_from_path(times, values, sigma=None) -> IncrementDataset:
    """Interior increments of one sampled path.

    Records starting within 2 sigma(x) sqrt(dt) of either boundary are
    dropped, since reflection makes the increment law non-Gaussian there.
    ``sigma`` may be a ModelParams, a constant, or None (then a
    conservative constant is estimated from the binned increment RMS).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    x, dx, dt = values[:-1], np.diff(values), np.diff(times)
    return _interior(x, dx, dt, sigma)


def _interior(x, dx, dt, sigma):
    if isinstance(sigma, ModelParams):
        sig = sigma.sigma0 + sigma.sigma1 * x
    elif sigma is None:
        sig = _sigma_ceiling(x, dx, dt)
    else:
        sig = float(sigma)
    margin = 2.0 * sig * np.sqrt(dt)
    keep = (x >= margin) & (x <= 1.0 - margin)
    return IncrementDataset(x[keep], dx[keep], dt[keep])


def increments_from_ensemble(ens, sigma=None) -> IncrementDataset:
    """Interior increments pooled over every trajectory of an Ensemble."""
    v = ens.values
    dt = np.broadcast_to(np.diff(ens.times), (v.shape[0], v.shape[1] - 1))
    return _interior(v[:, :-1].ravel(), np.diff(v, axis=1).ravel(), dt.ravel(), sigma)


def pseudo_log_likelihood(p: ModelParams, data: IncrementDataset) -> float:
    """sum_i log N(dx_i; mu(x_i) dt_i, sigma(x_i)^2 dt_i)."""
    if len(data) == 0:
        raise ValidationError("data", "must be nonempty")
    return float(_kernels.loglik(data.x, data.dx, data.dt, *p.coefficients))


@dataclass
class FitResult:
    params: ModelParams
    log_likelihood: float
    converged: bool
    n_iterations: int
    objective_trace: list = field(default_factory=list)
    n_records: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "params": self.params.as_dict(),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "n_records": self.n_records,
            "objective_trace": self.objective_trace,
        }, indent=2, sort_keys=True) + "\n"


def fit_params(data: IncrementDataset, init: ModelParams | None = None, max_iter: int = 5000,
               tol: float = 1e-10, max_restarts: int = 20) -> FitResult:
    """Maximize the pseudo-likelihood over the admissible box.

    The objective is the mean negative log-likelihood per record, so ``tol``
    does not scale with the dataset size. A run converges when the simplex
    objective values agree to within ``tol``; the search is then restarted
    from the best point and stops once a restart improves by less than
    ``tol``. ``max_iter`` bounds the total simplex iterations.
    """
    if len(data) < 100:
        raise ValidationError("data", f"need at least 100 records (got {len(data)})")
    init = DEFAULT_INIT if init is None else init
    n = len(data)
    x, dx, dt = data.x, data.dx, data.dt

    def objective(v):
        a, b, g, s0, s1 = v
        if min(a, b, g, s1) < 0 or s0 < SIGMA0_FLOOR:
            return math.inf
        return -_kernels.loglik(x, dx, dt, a, b, g, s0, s1) / n

    trace = []

    def record(xk):
        trace.append(float(objective(xk)))

    best = np.array(init.coefficients, dtype=float)
    best[3] = max(best[3], SIGMA0_FLOOR)
    best_f = objective(best)
    trace.append(float(best_f))
    used = 0
    converged = False
    for _ in range(max_restarts):
        budget = max_iter - used
        if budget <= 0:
            break
        res = minimize(objective, best, method="Nelder-Mead", bounds=_BOUNDS, callback=record,
                       options={"maxiter": budget, "xatol": 1e-9, "fatol": tol, "adaptive": True})
        used += int(res.nit)
        improvement = best_f - res.fun
        if res.fun <= best_f:
            best, best_f = np.asarray(res.x, dtype=float), float(res.fun)
        if not res.success:
            break
        if improvement < tol:
            converged = True
            break
    a, b, g, s0, s1 = (float(v) for v in best)
    params = ModelParams(a, b, g, max(s0, SIGMA0_FLOOR), s1)
    return FitResult(params, pseudo_log_likelihood(params, data), converged, used, trace, n)


def read_dataset_csv(path) -> IncrementDataset:
    """Load ``t,x`` (one sampled path) or ``x,dx,dt`` (increment records)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError("fit.data", f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise ValidationError("fit.data", f"non-numeric value in {path}: {exc}") from None
    if body.ndim != 2 or body.shape[0] == 0:
        raise ValidationError("fit.data", f"{path} has no data rows")
    cols = {name: body[:, k] for k, name in enumerate(header)}
    if {"x", "dx", "dt"} <= cols.keys():
        return IncrementDataset(cols["x"], cols["dx"], cols["dt"])
    if {"t", "x"} <= cols.keys():
        if "traj_id" in cols:
            ids = cols["traj_id"]
            parts = [increments_from_path(cols["t"][ids == i], cols["x"][ids == i]) for i in np.unique(ids)]
            return IncrementDataset.concatenate(parts)
        return increments_from_path(cols["t"], cols["x"])
    raise ValidationError("fit.data", f"unrecognized header {header!r}; expected 't,x' or 'x,dx,dt'")
