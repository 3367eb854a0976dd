"""Bounded one-dimensional severity SDE toolkit."""

__version__ = "0.1.0"

from .errors import SolverError, ValidationError  # noqa: E402
from .model import (  # noqa: E402
    PANEL_A,
    PANEL_B,
    PANEL_C,
    ModelParams,
    Regime,
    classify_regime,
    diffusion,
    drift,
    drift_root,
    find_fixed_points,
    ratio_threshold,
    potential,
)
from ._accel import BACKEND  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "ModelParams",
    "Regime",
    "SolverError",
    "ValidationError",
    "PANEL_A",
    "PANEL_B",
    "PANEL_C",
    "classify_regime",
    "diffusion",
    "drift",
    "drift_root",
    "find_fixed_points",
    "ratio_threshold",
    "potential",
]
