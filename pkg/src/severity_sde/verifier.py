"""
Stability certificates for a parameter set, harm threshold and horizon.

Three checks feed the verdict:

drift sign
    some attracting drift root r < x_harm exists and mu < 0 on (r, x_harm),
    so the drift pushes mass back below the threshold;
unimodality
    the stationary density has exactly one prominent mode, below x_harm;
mean first passage
    the quadrature MFPT from x_start is at least the horizon.

A fourth quantity, the probability of reaching x_harm within the horizon
(absorbing Fokker-Planck evolution), guards the ALIGNED verdict: a mean
passage time only modestly above the horizon still lets a large fraction
of paths cross in time.

Verdicts: ALIGNED_SUBCRITICAL when all three checks pass and the crossing
probability is at most ``max_crossing``; RUNAWAY_SUPERCRITICAL when the
MFPT check fails with T < horizon; INCONCLUSIVE otherwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum

from . import __version__
from .errors import SolverError, ValidationError
from .first_passage import DEFAULT_N_NODES, FirstPassageSpec, LOG_FLOAT_MAX, log_mfpt_quadrature
from .fokker_planck import DEFAULT_MIN_PROMINENCE, DEFAULT_N_CELLS, detect_modes, stationary_density, survival_probability
from .model import DEFAULT_EPS_CRIT, ModelParams, classify_regime, drift, find_fixed_points

DEFAULT_MAX_CROSSING = 0.05


class Verdict(str, Enum):
    ALIGNED_SUBCRITICAL = "ALIGNED_SUBCRITICAL"
    RUNAWAY_SUPERCRITICAL = "RUNAWAY_SUPERCRITICAL"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class Check:
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class Certificate:
    regime: str
    drift_sign_check: Check
    unimodality_check: Check
    mfpt_check: Check
    crossing_check: Check
    verdict: Verdict
    inputs_echo: dict
    diagnostics: list = field(default_factory=list)

    def as_dict(self, timestamp: bool = True) -> dict:
        out = {
            "regime": self.regime,
            "drift_sign_check": asdict(self.drift_sign_check),
            "unimodality_check": asdict(self.unimodality_check),
            "mfpt_check": asdict(self.mfpt_check),
            "crossing_check": asdict(self.crossing_check),
            "verdict": self.verdict.value,
            "inputs_echo": self.inputs_echo,
            "diagnostics": list(self.diagnostics),
            "toolkit_version": __version__,
            "schema": "severity-sde/certificate/1",
        }
        if timestamp:
            out["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return out

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.as_dict(timestamp), indent=2, sort_keys=True) + "\n"


def drift_sign_check(p: ModelParams, x_harm: float) -> Check:
    fps = find_fixed_points(p)
    if fps.degenerate:
        return Check(False, {"reason": "drift vanishes identically"})
    roots = list(fps.roots)
    for r, s in sorted(zip(fps.roots, fps.stability), reverse=True):
        if r >= x_harm or not s.attracts_from_above:
            continue
        between = [q for q in roots if r < q < x_harm]
        if not between and drift(p, 0.5 * (r + x_harm)) < 0:
            return Check(True, {"stable_root": r, "stability": s.value})
    return Check(False, {"reason": "no attracting root below x_harm with negative drift up to it",
                         "roots": roots, "stability": [s.value for s in fps.stability]})


def unimodality_check(p: ModelParams, x_harm: float, n_cells: int, min_prominence: float) -> Check:
    modes = detect_modes(stationary_density(p, n_cells), min_prominence)
    ok = modes.n_modes == 1 and modes.mode_locations[0] < x_harm
    return Check(ok, {"mode_locations": modes.mode_locations})


def mfpt_check(p: ModelParams, x_harm: float, x_start: float, horizon: float, n_nodes: int) -> Check:
    log_t = log_mfpt_quadrature(p, FirstPassageSpec(x_harm, x_start), n_nodes)
    t = math.exp(log_t) if log_t < LOG_FLOAT_MAX else None
    return Check(log_t >= math.log(horizon), {"mfpt": t, "log_mfpt": log_t, "horizon": horizon})


def certify(p: ModelParams, x_harm: float, x_start: float, horizon: float, *,
            n_cells: int = DEFAULT_N_CELLS, n_nodes: int = DEFAULT_N_NODES,
            min_prominence: float = DEFAULT_MIN_PROMINENCE, eps_crit: float = DEFAULT_EPS_CRIT,
            max_crossing: float = DEFAULT_MAX_CROSSING) -> Certificate:
    FirstPassageSpec(x_harm, x_start)
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValidationError("horizon", f"must be a positive finite real (got {horizon!r})")
    echo = {"params": p.as_dict(), "x_harm": x_harm, "x_start": x_start, "horizon": horizon,
            "n_cells": n_cells, "n_nodes": n_nodes, "min_prominence": min_prominence,
            "eps_crit": eps_crit, "max_crossing": max_crossing}
    diagnostics = []

    def guarded(name, fn, *args):
        try:
            return fn(*args)
        except (SolverError, FloatingPointError, ArithmeticError) as exc:
            diagnostics.append(f"{name}: {exc}")
            return None

    drift_c = guarded("drift_sign", drift_sign_check, p, x_harm)
    uni_c = guarded("unimodality", unimodality_check, p, x_harm, n_cells, min_prominence)
    mfpt_c = guarded("mfpt", mfpt_check, p, x_harm, x_start, horizon, n_nodes)
    survival = guarded("crossing", survival_probability, p, x_start, x_harm, horizon)
    if survival is None:
        cross_c = Check(False, {"crossing_probability": None, "max_crossing": max_crossing})
    else:
        crossing = 1.0 - survival
        cross_c = Check(crossing <= max_crossing, {"crossing_probability": crossing, "max_crossing": max_crossing})
    failed = Check(False, {"reason": "computation failed"})
    drift_c, uni_c, mfpt_c = (c if c is not None else failed for c in (drift_c, uni_c, mfpt_c))

    if diagnostics:
        verdict = Verdict.INCONCLUSIVE
    elif drift_c.passed and uni_c.passed and mfpt_c.passed and cross_c.passed:
        verdict = Verdict.ALIGNED_SUBCRITICAL
    elif not mfpt_c.passed:
        verdict = Verdict.RUNAWAY_SUPERCRITICAL
    else:
        verdict = Verdict.INCONCLUSIVE
    return Certificate(classify_regime(p, eps_crit).value, drift_c, uni_c, mfpt_c, cross_c,
                       verdict, echo, diagnostics)
