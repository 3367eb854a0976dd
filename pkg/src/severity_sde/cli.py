"""
Command-line front end.

    severity-sde <command> --config run.json [--section.key value ...] [--threads N]

Commands: simulate, evolve, stationary, mfpt, phase-diagram, scaling, fit,
certify. Each writes a fixed-name file into ``output_dir`` and prints a
one-line JSON summary. Exit status: 0 success, 1 invalid input, 2
numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import fit_params, read_dataset_csv
from .config import ConfigError, RunConfig, parse_override_value, validate_config
from .criticality import fit_scaling_exponent, phase_diagram, relaxation_time
from .errors import SolverError, ValidationError
from .export import write_density_csv, write_ensemble_csv, write_trajectory_csv
from .first_passage import dumps_records, mfpt_monte_carlo, mfpt_quadrature, result_record
from .fokker_planck import DensityGrid, detect_modes, evolve_density, stationary_density
from .model import ModelParams
from .sde import simulate_ensemble
from .verifier import certify

COMMANDS = ("simulate", "evolve", "stationary", "mfpt", "phase-diagram", "scaling", "fit", "certify")


def _finite_or_none(v):
    return v if v is not None and math.isfinite(v) else None


def cmd_simulate(cfg: RunConfig, out: Path, threads: int) -> dict:
    ens = simulate_ensemble(cfg.model, cfg.sim, threads=threads)
    path = out / "trajectory.csv"
    if len(ens) == 1:
        write_trajectory_csv(path, ens[0])
    else:
        write_ensemble_csv(path, ens)
    return {"file": str(path), "n_traj": len(ens), "n_records": int(ens.values.shape[1]),
            "terminal_mean": float(ens.values[:, -1].mean())}


def cmd_evolve(cfg: RunConfig, out: Path, threads: int) -> dict:
    x_init = cfg.sim.x0 if cfg.grid.x_init is None else cfg.grid.x_init
    init = DensityGrid.point_mass(cfg.grid.n_cells, x_init)
    grid = evolve_density(cfg.model, init, cfg.grid.dt, cfg.grid.n_steps)
    path = write_density_csv(out / "density.csv", grid)
    return {"file": str(path), "time": grid.time, "mean": grid.mean(), "variance": grid.variance(),
            "mass_error": float(grid.mass.sum() - 1.0)}


def cmd_stationary(cfg: RunConfig, out: Path, threads: int) -> dict:
    st = stationary_density(cfg.model, cfg.grid.n_cells)
    path = write_density_csv(out / "stationary.csv", st, cfg.model)
    modes = detect_modes(st)
    return {"file": str(path), "modes": modes.mode_locations, "is_bimodal": modes.is_bimodal,
            "log_normalization_constant": st.log_normalization_constant}


def cmd_mfpt(cfg: RunConfig, out: Path, threads: int) -> dict:
    spec = cfg.passage.spec
    records = []
    if cfg.passage.method in ("quadrature", "both"):
        t = mfpt_quadrature(cfg.model, spec, cfg.passage.n_nodes)
        records.append(result_record(cfg.model, spec, "quadrature", _finite_or_none(t),
                                     n_nodes=cfg.passage.n_nodes))
    if cfg.passage.method in ("monte_carlo", "both"):
        r = mfpt_monte_carlo(cfg.model, spec, cfg.sim, threads=threads)
        records.append(result_record(cfg.model, spec, "monte_carlo", r.mean_fpt, r.std_error,
                                     r.n_samples, r.n_censored, dt=cfg.sim.dt, seed=cfg.sim.seed))
    path = out / "mfpt.json"
    path.write_text(dumps_records(records))
    return {"file": str(path), "mean_fpt": {r["method"]: r["mean_fpt"] for r in records}}


def cmd_phase_diagram(cfg: RunConfig, out: Path, threads: int) -> dict:
    if cfg.sweep is None:
        raise ConfigError("sweep", "phase-diagram needs sweep.alpha_grid and sweep.beta_grid")
    m = cfg.model
    pd = phase_diagram(cfg.sweep.alpha_grid, cfg.sweep.beta_grid, m.gamma, m.sigma0, m.sigma1,
                       n_cells=cfg.grid.n_cells, threads=threads)
    path = out / "phase.csv"
    path.write_text(pd.to_csv())
    return {"file": str(path), "n_cells": int(pd.labels.size), "n_failures": len(pd.failures)}


def cmd_scaling(cfg: RunConfig, out: Path, threads: int) -> dict:
    beta = cfg.scaling.beta
    deltas = np.array(cfg.scaling.deltas)
    taus = [relaxation_time(cfg.model.replace(alpha=beta + d, beta=beta), cfg.grid.n_cells).tau for d in deltas]
    fit = fit_scaling_exponent(deltas, taus)
    path = out / "scaling.json"
    path.write_text(fit.to_json())
    return {"file": str(path), "exponent": fit.exponent, "r_squared": fit.r_squared}


def cmd_fit(cfg: RunConfig, out: Path, threads: int) -> dict:
    if cfg.fit.data is None:
        raise ConfigError("fit.data", "fit needs a dataset path")
    data = read_dataset_csv(cfg.fit.data)
    init = ModelParams(**cfg.fit.init) if cfg.fit.init else None
    res = fit_params(data, init, cfg.fit.max_iter, cfg.fit.tol)
    path = out / "fit.json"
    path.write_text(res.to_json())
    return {"file": str(path), "params": res.params.as_dict(), "converged": res.converged,
            "n_records": len(data)}


def cmd_certify(cfg: RunConfig, out: Path, threads: int) -> dict:
    if cfg.passage.horizon is None:
        raise ConfigError("passage.horizon", "certify needs an explicit horizon")
    cert = certify(cfg.model, cfg.passage.x_harm, cfg.passage.x_start, cfg.passage.horizon,
                   n_cells=cfg.grid.n_cells, n_nodes=cfg.passage.n_nodes)
    path = out / "certificate.json"
    path.write_text(cert.to_json())
    return {"file": str(path), "verdict": cert.verdict.value}


HANDLERS = {
    "simulate": cmd_simulate,
    "evolve": cmd_evolve,
    "stationary": cmd_stationary,
    "mfpt": cmd_mfpt,
    "phase-diagram": cmd_phase_diagram,
    "scaling": cmd_scaling,
    "fit": cmd_fit,
    "certify": cmd_certify,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="severity-sde",
        description="Severity SDE toolkit. Any config field can be overridden with --section.key VALUE.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    return parser


def _parse_overrides(extra):
    overrides = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or len(token) <= 2:
            raise ConfigError(token, "expected --section.key VALUE")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(key, "missing value")
            value = extra[i + 1]
            i += 2
        overrides.append((key, parse_override_value(value)))
    return overrides


def run_command(argv) -> int:
    parser = _parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        cfg = validate_config(args.config, _parse_overrides(extra))
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](cfg, out, args.threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    summary = {"command": args.command, **summary}
    print(json.dumps(summary, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
