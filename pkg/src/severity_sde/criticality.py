"""
Relaxation times, (alpha, beta) phase diagrams and power-law fits.

The relaxation time is the inverse spectral gap of the finite-volume
Fokker-Planck generator. That generator is tridiagonal with positive
off-diagonal products, hence similar to the symmetric tridiagonal matrix
with off-diagonal sqrt(sub * sup); its top two eigenvalues are found by
LAPACK bisection, which needs no starting vector and is deterministic.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import SolverError, ValidationError
from .fokker_planck import DEFAULT_N_CELLS, assemble_generator
from .model import DEFAULT_EPS_CRIT, ModelParams, Regime, classify_regime


@dataclass
class RelaxationResult:
    spectral_gap: float
    tau: float
    leading_eigenvalue: float


@dataclass
class PhaseDiagram:
    """``labels[i, j]`` and ``tau_matrix[i, j]`` belong to (alpha_grid[i], beta_grid[j])."""

    alpha_grid: np.ndarray
    beta_grid: np.ndarray
    labels: np.ndarray
    tau_matrix: np.ndarray
    failures: dict = field(default_factory=dict)

    def rows(self):
        for i, a in enumerate(self.alpha_grid):
            for j, b in enumerate(self.beta_grid):
                yield float(a), float(b), str(self.labels[i, j]), float(self.tau_matrix[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["alpha", "beta", "regime", "tau"])
        for a, b, label, tau in self.rows():
            writer.writerow([f"{a:.17g}", f"{b:.17g}", label, f"{tau:.17g}"])
        return buf.getvalue()


@dataclass
class ScalingFit:
    """log tau = intercept - exponent * log|delta| (natural logs)."""

    exponent: float
    intercept: float
    r_squared: float
    delta_values: np.ndarray
    tau_values: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "exponent": self.exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "delta_values": [float(d) for d in self.delta_values],
            "tau_values": [float(t) for t in self.tau_values],
        }, indent=2, sort_keys=True) + "\n"


def relaxation_time(p: ModelParams, n_cells: int = DEFAULT_N_CELLS) -> RelaxationResult:
    if n_cells < 128:
        raise ValidationError("n_cells", f"must be at least 128 (got {n_cells!r})")
    sub, diag, sup = assemble_generator(p, n_cells)
    off = np.sqrt(sub * sup)
    if not np.all(off > 0):
        raise SolverError("generator is numerically reducible (vanishing transition rate)")
    try:
        top = eigvalsh_tridiagonal(diag, off, select="i", select_range=(n_cells - 2, n_cells - 1))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"tridiagonal eigensolver failed: {exc}") from exc
    lead, second = float(top[1]), float(top[0])
    gap = -second
    if not gap > 0:
        raise SolverError(f"non-positive spectral gap {gap!r}")
    return RelaxationResult(gap, 1.0 / gap, lead)


def _phase_cell(args):
    a, b, gamma, sigma0, sigma1, n_cells, eps_crit = args
    p = ModelParams(a, b, gamma, sigma0, sigma1)
    label = classify_regime(p, eps_crit)
    try:
        return label, relaxation_time(p, n_cells).tau, None
    except SolverError as exc:
        return label, math.nan, str(exc)


def phase_diagram(alpha_grid, beta_grid, gamma: float, sigma0: float, sigma1: float,
                  n_cells: int = DEFAULT_N_CELLS, eps_crit: float = DEFAULT_EPS_CRIT,
                  threads: int = 1) -> PhaseDiagram:
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    beta_grid = np.asarray(beta_grid, dtype=float)
    for name, g in (("alpha_grid", alpha_grid), ("beta_grid", beta_grid)):
        if g.ndim != 1 or g.size == 0:
            raise ValidationError(name, "must be a nonempty list")
        if np.any(np.diff(g) <= 0):
            raise ValidationError(name, "must be strictly ascending")
    tasks = [(a, b, gamma, sigma0, sigma1, n_cells, eps_crit) for a in alpha_grid for b in beta_grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_phase_cell, tasks))
    else:
        results = [_phase_cell(t) for t in tasks]
    shape = (alpha_grid.size, beta_grid.size)
    labels = np.empty(shape, dtype=object)
    taus = np.empty(shape)
    failures = {}
    for k, (label, tau, err) in enumerate(results):
        i, j = divmod(k, beta_grid.size)
        labels[i, j] = label.value if isinstance(label, Regime) else label
        taus[i, j] = tau
        if err is not None:
            failures[(i, j)] = err
    return PhaseDiagram(alpha_grid, beta_grid, labels, taus, failures)


def fit_scaling_exponent(deltas, taus) -> ScalingFit:
    """Least-squares fit of log tau against log|delta|; exponent = -slope."""
    deltas = np.asarray(deltas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if deltas.shape != taus.shape or deltas.ndim != 1:
        raise ValidationError("taus", "deltas and taus must be 1-D with equal lengths")
    if deltas.size < 4:
        raise ValidationError("deltas", "need at least 4 points")
    if np.any(deltas == 0):
        raise ValidationError("deltas", "all deltas must be nonzero")
    if np.any(~(taus > 0)):
        raise ValidationError("taus", "all taus must be positive")
    lx = np.log(np.abs(deltas))
    ly = np.log(taus)
    if np.ptp(lx) == 0:
        raise SolverError("degenerate fit: all |delta| equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(-slope), float(intercept), min(max(r2, 0.0), 1.0), deltas, taus)


def integrated_autocorrelation_time(values, dt: float, c: float = 5.0) -> float:
    """Integrated autocorrelation time int_0^inf rho(t) dt of a sampled series.

    Uses the FFT autocorrelation, dt * (1/2 + sum_{k>=1} rho_k), truncated
    at the first window M >= c * tau (Sokal's rule).
    """
    y = np.asarray(values, dtype=float)
    y = y - y.mean()
    n = y.size
    f = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    partial = np.cumsum(acf) - 0.5
    for m in range(1, n):
        if m >= c * partial[m]:
            return float(partial[m] * dt)
    return float(partial[-1] * dt)
