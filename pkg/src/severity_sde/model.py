"""
Severity model: parameters and closed-form pointwise functions.

The state x in [0, 1] follows dx = mu(x) dt + sigma(x) dW with

    mu(x)    = alpha x (1 - x) - beta x^2 + gamma
    sigma(x) = sigma0 + sigma1 x

and the potential V is the antiderivative of -mu with V(0) = 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError

DEFAULT_EPS_CRIT = 0.02


@dataclass(frozen=True)
class ModelParams:
    """Drift and diffusion coefficients.

    Parameters
    ----------
    alpha : float
        Self-reinforcement rate (logistic term), >= 0.
    beta : float
        Alignment damping rate (quadratic term), >= 0.
    gamma : float
        Baseline emergence rate (constant term), >= 0.
    sigma0 : float
        Baseline noise amplitude, strictly positive.
    sigma1 : float
        Severity-proportional noise amplitude, >= 0.
    """

    alpha: float
    beta: float
    gamma: float
    sigma0: float
    sigma1: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "sigma0", "sigma1"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ValidationError(name, f"must be a real number (got {value!r})")
            if not math.isfinite(value):
                raise ValidationError(name, f"must be finite (got {value!r})")
            object.__setattr__(self, name, float(value))
        for name in ("alpha", "beta", "gamma", "sigma1"):
            if getattr(self, name) < 0:
                raise ValidationError(name, f"must be nonnegative (got {getattr(self, name)!r})")
        if self.sigma0 <= 0:
            raise ValidationError("sigma0", f"must be strictly positive (got {self.sigma0!r})")

    def as_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ModelParams":
        values = self.as_dict()
        values.update(changes)
        return ModelParams(**values)

    @property
    def coefficients(self) -> tuple:
        return (self.alpha, self.beta, self.gamma, self.sigma0, self.sigma1)


def check_severity(x, name: str = "x") -> float:
    """Validate a scalar severity level and return it as float."""
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValidationError(name, f"must lie in [0, 1] (got {x!r})")
    return x


def drift(p: ModelParams, x):
    """mu(x) = alpha x (1 - x) - beta x^2 + gamma, elementwise."""
    x = np.asarray(x, dtype=float)
    out = p.alpha * x * (1.0 - x) - p.beta * x * x + p.gamma
    return out if out.ndim else float(out)


def drift_slope(p: ModelParams, x):
    """mu'(x) = alpha - 2 (alpha + beta) x."""
    x = np.asarray(x, dtype=float)
    out = p.alpha - 2.0 * (p.alpha + p.beta) * x
    return out if out.ndim else float(out)


def diffusion(p: ModelParams, x):
    """sigma(x) = sigma0 + sigma1 x (strictly positive)."""
    x = np.asarray(x, dtype=float)
    out = p.sigma0 + p.sigma1 * x
    return out if out.ndim else float(out)


def potential(p: ModelParams, x):
    """V(x) = -(alpha/2) x^2 + ((alpha + beta)/3) x^3 - gamma x, with V(0) = 0."""
    x = np.asarray(x, dtype=float)
    out = -0.5 * p.alpha * x**2 + (p.alpha + p.beta) / 3.0 * x**3 - p.gamma * x
    return out if out.ndim else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def log_scale(p: ModelParams, x):
    """Phi(x) = 2 * int_0^x mu(z) / sigma(z)^2 dz.

    Uses the closed-form antiderivative of the rational integrand when the
    noise slope is appreciable, and 16-point Gauss-Legendre on [0, x]
    otherwise (the closed form cancels catastrophically as sigma1 -> 0,
    while the integrand is then nearly polynomial).
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    s0, s1 = p.sigma0, p.sigma1
    c0, c1, c2 = p.gamma, p.alpha, -(p.alpha + p.beta)

    analytic = s1 * flat >= 1e-2 * s0
    if np.any(analytic):
        xa = flat[analytic]
        u = s0 + s1 * xa
        a2 = c2 / s1**2
        a1 = c1 / s1 - 2.0 * c2 * s0 / s1**2
        a0 = c0 - c1 * s0 / s1 + c2 * s0**2 / s1**2
        # sigma >= s0 > 0 so log(u / s0) = log1p(s1 x / s0) is safe
        out[analytic] = 2.0 / s1 * (a2 * s1 * xa + a1 * np.log1p(s1 * xa / s0) + a0 * (s1 * xa) / (s0 * u))
    if np.any(~analytic):
        xq = flat[~analytic]
        z = 0.5 * xq[:, None] * (_GL_NODES[None, :] + 1.0)
        mu = c0 + c1 * z + c2 * z * z
        sig = s0 + s1 * z
        out[~analytic] = xq * (_GL_WEIGHTS[None, :] * mu / sig**2).sum(axis=1)
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    STABLE_FROM_ABOVE = "stable_from_above"
    STABLE_FROM_BELOW = "stable_from_below"
    MARGINAL = "marginal"

    @property
    def attracts_from_above(self) -> bool:
        return self in (Stability.STABLE, Stability.STABLE_FROM_ABOVE)


@dataclass(frozen=True)
class FixedPointSet:
    """Zeros of the drift in [0, 1].

    ``degenerate`` flags the identically-zero drift, where every point of
    [0, 1] is a marginal fixed point and ``roots`` is left empty.
    """

    roots: tuple
    stability: tuple
    degenerate: bool = False

    def __len__(self):
        return len(self.roots)

    def stable_roots(self) -> list:
        return [r for r, s in zip(self.roots, self.stability) if s.attracts_from_above]


def find_fixed_points(p: ModelParams, tol: float = 1e-10) -> FixedPointSet:
    """Roots of (alpha + beta) x^2 - alpha x - gamma = 0 lying in [0, 1].

    Roots are taken from the cancellation-free quadratic formula and
    labelled by the sign of mu'; a vanishing slope is resolved by the sign
    of mu'' = -2 (alpha + beta).
    """
    if tol <= 0:
        raise ValidationError("tol", "must be positive")
    a = p.alpha + p.beta
    if a == 0.0:
        # alpha = beta = 0 given nonnegativity: mu is the constant gamma
        if p.gamma > 0:
            return FixedPointSet((), ())
        return FixedPointSet((), (), degenerate=True)

    disc = p.alpha**2 + 4.0 * a * p.gamma
    q = 0.5 * (p.alpha + math.sqrt(disc))
    if q == 0.0:
        candidates = [0.0]
    else:
        candidates = sorted({q / a, -p.gamma / q})

    roots, labels = [], []
    for r in candidates:
        if r < -tol or r > 1.0 + tol:
            continue
        r = min(max(r, 0.0), 1.0)
        slope = drift_slope(p, r)
        if slope < -tol:
            label = Stability.STABLE
        elif slope > tol:
            label = Stability.UNSTABLE
        elif a > 0:
            # mu'' < 0: mu <= 0 on both sides, flow approaches from above
            label = Stability.STABLE_FROM_ABOVE
        else:
            label = Stability.MARGINAL
        roots.append(r)
        labels.append(label)
    return FixedPointSet(tuple(roots), tuple(labels))


def drift_root(p: ModelParams, tol: float = 1e-10):
    """Largest attracting drift root in [0, 1], or None.

    This is the threshold used by every downstream module; see
    :func:`ratio_threshold` for the alternative ratio formula.
    """
    stable = find_fixed_points(p, tol).stable_roots()
    return max(stable) if stable else None


def ratio_threshold(p: ModelParams) -> float:
    """(alpha - beta) / (alpha + beta), returned unclipped.

    The value may fall outside [0, 1]; it does not coincide with a zero of
    the drift in general.
    """
    a = p.alpha + p.beta
    if a == 0.0:
        raise ValidationError("alpha+beta", "threshold undefined when alpha + beta = 0")
    return (p.alpha - p.beta) / a


class Regime(str, Enum):
    SUBCRITICAL = "SUBCRITICAL"
    NEAR_CRITICAL = "NEAR_CRITICAL"
    SUPERCRITICAL = "SUPERCRITICAL"


def classify_regime(p: ModelParams, eps_crit: float = DEFAULT_EPS_CRIT) -> Regime:
    if eps_crit <= 0:
        raise ValidationError("eps_crit", "must be positive")
    if p.beta - p.alpha > eps_crit:
        return Regime.SUBCRITICAL
    if p.alpha - p.beta > eps_crit:
        return Regime.SUPERCRITICAL
    return Regime.NEAR_CRITICAL


# Fig-2-style parameter sets: alpha, beta from inverting the plotted cubic potentials
PANEL_A = ModelParams(alpha=0.3, beta=0.5, gamma=0.01, sigma0=0.05, sigma1=0.1)
PANEL_B = ModelParams(alpha=0.45, beta=0.45, gamma=0.01, sigma0=0.05, sigma1=0.1)
PANEL_C = ModelParams(alpha=0.6, beta=0.4, gamma=0.01, sigma0=0.05, sigma1=0.1)
PANELS = {"A": PANEL_A, "B": PANEL_B, "C": PANEL_C}
