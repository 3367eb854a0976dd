"""CSV writers for trajectories and densities (17 significant digits)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fokker_planck import DensityGrid, StationaryDensity
from .sde import Ensemble, Trajectory

FLOAT_FMT = "%.17g"


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    path = Path(path)
    np.savetxt(path, np.column_stack([traj.times, traj.values]), fmt=FLOAT_FMT,
               delimiter=",", header="t,x", comments="")
    return path


def write_ensemble_csv(path, ens: Ensemble) -> Path:
    path = Path(path)
    n, m = ens.values.shape
    ids = np.repeat(np.arange(n), m)
    t = np.tile(ens.times, n)
    with path.open("w") as fh:
        fh.write("traj_id,t,x\n")
        np.savetxt(fh, np.column_stack([ids, t, ens.values.ravel()]),
                   fmt=["%d", FLOAT_FMT, FLOAT_FMT], delimiter=",")
    return path


def write_density_csv(path, density, params=None) -> Path:
    """``x,p`` rows with p = mass / cell_width.

    A StationaryDensity is preceded by one ``#`` line of JSON metadata
    holding the parameters and the normalization constant.
    """
    path = Path(path)
    grid = density.grid if isinstance(density, StationaryDensity) else density
    with path.open("w") as fh:
        if isinstance(density, StationaryDensity):
            z = density.normalization_constant
            meta = {"log_normalization_constant": density.log_normalization_constant,
                    "normalization_constant": z if np.isfinite(z) else None}
            if params is not None:
                meta["params"] = params.as_dict()
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("x,p\n")
        np.savetxt(fh, np.column_stack([grid.cell_centers, grid.density]), fmt=FLOAT_FMT, delimiter=",")
    return path


def read_density_csv(path) -> DensityGrid:
    with open(path) as fh:
        rows = [line for line in fh if line.strip() and not line.startswith("#")]
    data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
    return DensityGrid.from_density(data[:, 1])
