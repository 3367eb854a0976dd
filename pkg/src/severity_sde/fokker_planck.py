"""
Finite-volume Fokker-Planck solver on [0, 1] with zero-flux boundaries.

The density is carried as cell masses m_i on a uniform grid of n cells.
Writing the flux as J = a u - u' with u = D P, D = sigma^2 / 2 and
a = 2 mu / sigma^2, the face flux between cells i and i+1 uses
exponential fitting (Scharfetter-Gummel, the 1-D Chang-Cooper weighting)

    J = (B(-z) D_i m_i - B(z) D_{i+1} m_{i+1}) / h^2,   B(z) = z / (e^z - 1),

with z = h (a_i + a_{i+1}) / 2. Off-diagonal rates are nonnegative and each
column of the generator sums to zero, so implicit Euler steps conserve
mass and keep it nonnegative. A face carries zero flux exactly when
m_{i+1} / m_i = exp(z) D_i / D_{i+1}, i.e. when the masses follow the
cumulative-trapezoid closed form computed by :func:`stationary_density`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.special import logsumexp

from .errors import SolverError, ValidationError
from .model import ModelParams, check_severity, diffusion, drift

DEFAULT_N_CELLS = 2000
DEFAULT_DT = 0.1
DEFAULT_MIN_PROMINENCE = 0.05
MASS_TOL = 1e-9


def cell_centers(n_cells: int) -> np.ndarray:
    return (np.arange(n_cells) + 0.5) / n_cells


@dataclass
class DensityGrid:
    """Probability mass per cell on the uniform grid x_i = (i + 0.5) / n."""

    mass: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.ndim != 1 or self.mass.size < 1:
            raise ValidationError("mass", "must be a nonempty 1-D array")
        if np.any(self.mass < 0) or not np.all(np.isfinite(self.mass)):
            raise ValidationError("mass", "cell masses must be finite and nonnegative")
        if abs(self.mass.sum() - 1.0) > MASS_TOL:
            raise ValidationError("mass", f"must sum to 1 (got {self.mass.sum()!r})")

    @property
    def n_cells(self) -> int:
        return self.mass.size

    @property
    def cell_width(self) -> float:
        return 1.0 / self.n_cells

    @property
    def cell_centers(self) -> np.ndarray:
        return cell_centers(self.n_cells)

    @property
    def density(self) -> np.ndarray:
        return self.mass / self.cell_width

    def mean(self) -> float:
        return float(self.mass @ self.cell_centers)

    def variance(self) -> float:
        x = self.cell_centers
        mu = self.mean()
        return float(self.mass @ (x - mu) ** 2)

    @classmethod
    def uniform(cls, n_cells: int) -> "DensityGrid":
        return cls(np.full(n_cells, 1.0 / n_cells))

    @classmethod
    def point_mass(cls, n_cells: int, x: float) -> "DensityGrid":
        x = check_severity(x)
        mass = np.zeros(n_cells)
        mass[min(int(x * n_cells), n_cells - 1)] = 1.0
        return cls(mass)

    @classmethod
    def from_density(cls, values) -> "DensityGrid":
        """Normalize arbitrary nonnegative per-cell values into a grid."""
        values = np.asarray(values, dtype=float)
        return cls(values / values.sum())


@dataclass
class StationaryDensity:
    """Closed-form stationary law sampled at cell centers.

    ``log_unnormalized`` is log[(1/sigma^2) exp(Phi)] with Phi accumulated by
    the trapezoid rule from x = 0; ``normalization_constant`` Z makes
    exp(log_unnormalized) / Z a probability density (it may overflow to inf,
    ``log_normalization_constant`` never does).
    """

    grid: DensityGrid
    log_unnormalized: np.ndarray
    log_normalization_constant: float

    @property
    def normalization_constant(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_normalization_constant))

    @property
    def mass(self) -> np.ndarray:
        return self.grid.mass

    @property
    def density(self) -> np.ndarray:
        return self.grid.density


@dataclass
class ModeReport:
    mode_locations: list
    mode_masses: list
    is_bimodal: bool

    @property
    def n_modes(self) -> int:
        return len(self.mode_locations)


def _bernoulli(z):
    """B(z) = z / (exp(z) - 1), with B(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    with np.errstate(over="ignore"):
        out[nz] = z[nz] / np.expm1(z[nz])
    return out


def log_drift_ratio(p: ModelParams, x) -> np.ndarray:
    """a(x) = 2 mu(x) / sigma(x)^2."""
    return 2.0 * drift(p, x) / diffusion(p, x) ** 2


def assemble_generator(p: ModelParams, n_cells: int, length: float = 1.0, absorbing: bool = False):
    """Tridiagonal generator acting on cell masses.

    Returns ``(sub, diag, sup)``: ``sub[i]`` is the rate from cell i into
    cell i+1 and ``sup[i]`` the rate from cell i+1 into cell i, so that
    dm_i/dt = sub[i-1] m_{i-1} + diag[i] m_i + sup[i] m_{i+1}.

    The grid covers [0, ``length``]. With ``absorbing`` the right edge is a
    Dirichlet (P = 0) boundary half a cell from the last center, and mass
    leaving through it is lost; otherwise both edges are zero-flux.
    """
    if n_cells < 2:
        raise ValidationError("n_cells", "must be at least 2")
    h = length / n_cells
    x = (np.arange(n_cells) + 0.5) * h
    a = log_drift_ratio(p, x)
    d = 0.5 * diffusion(p, x) ** 2
    z = 0.5 * h * (a[:-1] + a[1:])
    up = _bernoulli(-z) * d[:-1] / h**2
    down = _bernoulli(z) * d[1:] / h**2
    diag = np.zeros(n_cells)
    diag[:-1] -= up
    diag[1:] -= down
    if absorbing:
        z_edge = 0.25 * h * (a[-1] + float(log_drift_ratio(p, length)))
        diag[-1] -= 2.0 * float(_bernoulli(-z_edge)) * d[-1] / h**2
    return up, diag, down


def apply_generator(gen, m: np.ndarray) -> np.ndarray:
    sub, diag, sup = gen
    out = diag * m
    out[1:] += sub * m[:-1]
    out[:-1] += sup * m[1:]
    return out


def _implicit_steps(gen, m: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    sub, diag, sup = gen
    dl, dd, du = -dt * sub, 1.0 - dt * diag, -dt * sup
    dl, dd, du, du2, ipiv, info = lapack.dgttrf(dl, dd, du)
    if info != 0:
        raise SolverError(f"implicit step matrix is singular (dgttrf info={info}, n_cells={m.size}, dt={dt})")
    for _ in range(n_steps):
        m, info = lapack.dgttrs(dl, dd, du, du2, ipiv, m)
        if info != 0:
            raise SolverError(f"tridiagonal solve failed (dgttrs info={info})")
    if not np.all(np.isfinite(m)):
        raise SolverError("non-finite mass after evolution")
    # round-off can leave values like -1e-300 in far tails
    np.maximum(m, 0.0, out=m)
    return m


def evolve_density(p: ModelParams, init: DensityGrid, dt: float = DEFAULT_DT, n_steps: int = 1) -> DensityGrid:
    """Advance the density by ``n_steps`` backward-Euler steps of size ``dt``.

    (I - dt L) is a nonsingular M-matrix for any dt > 0; it is factored once
    and reused for every step.
    """
    if not dt > 0:
        raise ValidationError("dt", "must be positive")
    if n_steps < 1:
        raise ValidationError("n_steps", "must be >= 1")
    m = _implicit_steps(assemble_generator(p, init.n_cells), init.mass.copy(), dt, n_steps)
    grid = DensityGrid.__new__(DensityGrid)
    grid.mass = m
    grid.time = init.time + n_steps * dt
    return grid


def survival_probability(p: ModelParams, x_start: float, x_harm: float, horizon: float,
                         n_cells: int = 1000, n_steps: int = 2000) -> float:
    """P(path started at x_start has not reached x_harm by ``horizon``).

    Evolves a point mass on [0, x_harm] with an absorbing right edge and
    returns the mass that remains.
    """
    if not 0.0 <= x_start < x_harm < 1.0:
        raise ValidationError("x_start", "need 0 <= x_start < x_harm < 1")
    if not horizon > 0:
        raise ValidationError("horizon", "must be positive")
    m = np.zeros(n_cells)
    m[min(int(x_start / x_harm * n_cells), n_cells - 1)] = 1.0
    gen = assemble_generator(p, n_cells, length=x_harm, absorbing=True)
    m = _implicit_steps(gen, m, horizon / n_steps, n_steps)
    return float(min(m.sum(), 1.0))


def stationary_density(p: ModelParams, n_cells: int = DEFAULT_N_CELLS) -> StationaryDensity:
    """P_ss(x) proportional to (1 / sigma^2) exp(2 int_0^x mu / sigma^2 dz).

    The exponent is accumulated by the trapezoid rule on cell centers (plus
    the half cell from 0), and exponentiated after subtracting its maximum.
    """
    if n_cells < 16:
        raise ValidationError("n_cells", "must be at least 16")
    x = cell_centers(n_cells)
    h = 1.0 / n_cells
    a = log_drift_ratio(p, x)
    a0 = float(log_drift_ratio(p, 0.0))
    phi = np.empty(n_cells)
    phi[0] = 0.5 * x[0] * (a0 + a[0])
    phi[1:] = phi[0] + np.cumsum(0.5 * h * (a[:-1] + a[1:]))
    log_unnorm = phi - np.log(diffusion(p, x) ** 2)
    lse = logsumexp(log_unnorm)
    mass = np.exp(log_unnorm - lse)
    mass /= mass.sum()
    grid = DensityGrid.__new__(DensityGrid)
    grid.mass = mass
    grid.time = math.inf
    return StationaryDensity(grid, log_unnorm, float(lse + math.log(h)))


def detect_modes(d, min_prominence: float = DEFAULT_MIN_PROMINENCE) -> ModeReport:
    """Prominent local maxima of the per-cell density.

    A candidate is a run of equal cells strictly higher than every
    neighbouring cell (a single cell in the generic case; boundary runs have
    one neighbour, a grid-wide flat run has none and is never a candidate).
    Its prominence is the height above the higher of the two flanking
    minima, each flank running until the first strictly higher cell or the
    end of the grid. Candidates whose prominence exceeds ``min_prominence``
    times the global maximum are reported, located at the run centre, with
    the probability mass lying between their flanking minima.
    """
    grid = d.grid if isinstance(d, StationaryDensity) else d
    y = grid.density
    x = grid.cell_centers
    n = y.size
    # runs of equal values: [starts[k], ends[k])
    starts = np.concatenate([[0], np.flatnonzero(y[1:] != y[:-1]) + 1])
    ends = np.concatenate([starts[1:], [n]])
    threshold = min_prominence * y.max()

    locations, masses = [], []
    for a, b in zip(starts, ends):
        left = y[a - 1] if a > 0 else None
        right = y[b] if b < n else None
        if (left is None and right is None) or (left is not None and left >= y[a]) \
                or (right is not None and right >= y[a]):
            continue
        bases, lo, hi = [], a, b
        if a > 0:
            higher = np.flatnonzero(y[:a] > y[a])
            start = higher[-1] + 1 if higher.size else 0
            lo = start + int(np.argmin(y[start:a]))
            bases.append(y[lo])
        if b < n:
            higher = np.flatnonzero(y[b:] > y[a])
            stop = b + higher[0] if higher.size else n
            hi = b + int(np.argmin(y[b:stop])) + 1
            bases.append(y[hi - 1])
        if y[a] - max(bases) > threshold:
            locations.append(float(0.5 * (x[a] + x[b - 1])))
            masses.append(float(grid.mass[lo:hi].sum()))
    return ModeReport(locations, masses, len(locations) >= 2)
