import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from severity_sde.errors import ValidationError
from severity_sde.first_passage import (
    FirstPassageSpec,
    _log_exprel,
    dumps_records,
    log_mfpt_quadrature,
    mfpt_monte_carlo,
    mfpt_profile,
    mfpt_quadrature,
    result_record,
)
from severity_sde.model import PANEL_A, PANEL_B, PANEL_C, PANELS, ModelParams, diffusion, drift
from severity_sde.sde import SimConfig

ZERO = ModelParams(alpha=0.0, beta=0.0, gamma=0.0, sigma0=0.05, sigma1=0.0)
DAMPED = ModelParams(alpha=0.0, beta=1.0, gamma=0.0, sigma0=0.02, sigma1=0.0)
SPEC = FirstPassageSpec(x_harm=0.7, x_start=0.1)

# quadrature values, confirmed by the ODE oracle below and by Monte Carlo
GOLDEN = {"A": 138.4297046821604, "B": 22.569754785881532, "C": 9.60388854965209}

params = st.builds(
    ModelParams,
    alpha=st.floats(0.0, 1.0),
    beta=st.floats(0.0, 1.0),
    gamma=st.floats(0.0, 0.1),
    sigma0=st.floats(0.05, 0.3),
    sigma1=st.floats(0.0, 0.3),
)


def _ode_oracle(p, x_start, x_harm):
    """Integrate v = T' from the reflecting end v(0) = 0, then T = -int v."""
    def rhs(x, y):
        return [2.0 * (-1.0 - drift(p, x) * y[0]) / diffusion(p, x) ** 2, y[0]]

    sol = solve_ivp(rhs, (0.0, x_harm), [0.0, 0.0], method="Radau", rtol=1e-12, atol=1e-14, dense_output=True)
    return float(sol.sol(x_start)[1] - sol.y[1, -1])


def test_spec_validation():
    with pytest.raises(ValidationError) as err:
        FirstPassageSpec(x_harm=0.5, x_start=0.5)
    assert err.value.field == "x_start"
    with pytest.raises(ValidationError):
        FirstPassageSpec(x_harm=1.0)
    with pytest.raises(ValidationError):
        FirstPassageSpec(x_harm=0.5, t_max=0.0)


def test_log_exprel():
    d = np.array([-700.0, -30.0, -1.0, -1e-10, 0.0, 1e-10, 1.0, 30.0, 700.0])
    ref = np.array([math.log(math.expm1(v) / v) if v != 0 else 0.0 for v in d[1:-1]])
    np.testing.assert_allclose(_log_exprel(d)[1:-1], ref, rtol=1e-12, atol=1e-15)
    assert np.isfinite(_log_exprel(d)).all()


def test_zero_drift_closed_form():
    assert mfpt_quadrature(ZERO, FirstPassageSpec(0.7, 0.0)) == pytest.approx(196.0, rel=5e-3)
    xs = np.array([0.0, 0.2, 0.5, 0.69, 0.7])
    np.testing.assert_allclose(mfpt_profile(ZERO, 0.7, xs), (0.49 - xs**2) / 0.0025, rtol=1e-4, atol=1e-9)


def test_start_at_threshold_is_zero():
    assert mfpt_profile(ZERO, 0.7, [0.7])[0] == 0.0


@pytest.mark.parametrize("name", ["A", "B", "C"])
def test_panel_values_match_ode_oracle(name):
    p = PANELS[name]
    got = mfpt_quadrature(p, SPEC)
    assert got == pytest.approx(_ode_oracle(p, 0.1, 0.7), rel=1e-5)
    assert got == pytest.approx(GOLDEN[name], rel=1e-9)


def test_supercritical_reaches_harm_sooner():
    assert mfpt_quadrature(PANEL_C, SPEC) < mfpt_quadrature(PANEL_B, SPEC) < mfpt_quadrature(PANEL_A, SPEC)


@pytest.mark.parametrize("name", ["A", "B", "C"])
def test_node_refinement(name):
    p = PANELS[name]
    coarse = mfpt_quadrature(p, SPEC, 512)
    fine = mfpt_quadrature(p, SPEC, 1024)
    assert abs(coarse / fine - 1.0) < 1e-3


def test_node_floor():
    with pytest.raises(ValidationError):
        mfpt_quadrature(PANEL_A, SPEC, 32)


def test_overflow_reports_infinity_with_finite_log():
    spec = FirstPassageSpec(0.9, 0.0)
    log_t = log_mfpt_quadrature(DAMPED, spec)
    assert math.isfinite(log_t) and log_t > 1000
    assert mfpt_quadrature(DAMPED, spec) == math.inf
    # mu = -x^2, sigma = 0.02: log T is dominated by Phi(0.9) = -2 * 0.729 / 3 / 4e-4
    assert log_t == pytest.approx(2 * 0.729 / 3 / 4e-4, rel=0.01)


def test_log_domain_matches_oracle_in_the_stiff_regime():
    # large but representable exponent
    p = ModelParams(alpha=0.0, beta=1.0, gamma=0.0, sigma0=0.06, sigma1=0.0)
    spec = FirstPassageSpec(0.5, 0.0)
    assert mfpt_quadrature(p, spec) == pytest.approx(_ode_oracle(p, 0.0, 0.5), rel=1e-5)


@given(params, st.floats(0.3, 0.9))
@settings(max_examples=40, deadline=None)
def test_nonincreasing_in_start_point(p, x_harm):
    t = mfpt_profile(p, x_harm, np.linspace(0.0, x_harm, 12), n_nodes=256)
    assert np.all(np.diff(t) <= 1e-9 * t[0])
    assert t[-1] == 0.0


@given(params, st.floats(0.0, 0.3))
@settings(max_examples=40, deadline=None)
def test_monotone_in_parameters(p, d):
    t = lambda q: log_mfpt_quadrature(q, SPEC, 256)  # noqa: E731
    base = t(p)
    assert t(p.replace(alpha=p.alpha + d)) <= base + 1e-12
    assert t(p.replace(gamma=p.gamma + d)) <= base + 1e-12
    assert t(p.replace(beta=p.beta + d)) >= base - 1e-12


def test_monte_carlo_result_invariants_and_determinism():
    spec = FirstPassageSpec(0.7, 0.1, t_max=20.0)
    cfg = SimConfig(dt=0.01, seed=5, n_traj=600)
    r1 = mfpt_monte_carlo(PANEL_B, spec, cfg)
    r2 = mfpt_monte_carlo(PANEL_B, spec, cfg, threads=3)
    assert r1.n_samples == 600
    assert 0 <= r1.n_censored <= r1.n_samples
    assert r1.hit_times.tobytes() == r2.hit_times.tobytes()
    assert r1.mean_fpt == pytest.approx(r1.hit_times.mean())
    # hit times are whole steps, capped by t_max
    steps = r1.hit_times / 0.01
    np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)
    assert r1.hit_times.max() <= 20.0 + 1e-9


def test_monte_carlo_agrees_with_quadrature():
    spec = FirstPassageSpec(0.7, 0.1, t_max=1e3)
    r = mfpt_monte_carlo(PANEL_C, spec, SimConfig(dt=0.002, seed=77, n_traj=4000))
    assert r.censored_fraction < 0.01
    q = mfpt_quadrature(PANEL_C, spec)
    assert abs(r.mean_fpt - q) <= 3 * r.std_error + 0.02 * q


def test_start_just_below_threshold():
    spec = FirstPassageSpec(0.7, 0.7 - 1e-9, t_max=1e3)
    r = mfpt_monte_carlo(ZERO, spec, SimConfig(dt=0.005, seed=3, n_traj=2000))
    assert r.n_censored == 0
    # an immediate hit needs an upward first increment, so about half the paths
    # hit on step one; the rest return within a time that is tiny next to T(0) = 196
    first = np.mean(r.hit_times == 0.005)
    assert 0.45 < first < 0.55
    assert r.mean_fpt < 0.02 * 196.0


def test_rare_crossing_is_censored_and_flagged():
    spec = FirstPassageSpec(0.9, 0.0, t_max=10.0)
    r = mfpt_monte_carlo(DAMPED, spec, SimConfig(dt=0.01, seed=1, n_traj=500))
    assert r.censored_fraction > 0.99
    assert r.mean_fpt is None or r.biased_low
    assert log_mfpt_quadrature(DAMPED, FirstPassageSpec(0.9, 0.0)) > math.log(spec.t_max) + 50


def test_result_records_serialize():
    recs = [
        result_record(PANEL_A, SPEC, "quadrature", mfpt_quadrature(PANEL_A, SPEC), n_nodes=1024),
        result_record(DAMPED, FirstPassageSpec(0.9, 0.0), "quadrature", math.inf),
    ]
    out = json.loads(dumps_records(recs))
    assert out["results"][0]["mean_fpt"] == pytest.approx(GOLDEN["A"])
    assert out["results"][1]["mean_fpt"] is None
    assert out["results"][0]["params"] == PANEL_A.as_dict()


def test_panels_ordered_by_mean_passage_also_in_monte_carlo():
    spec = FirstPassageSpec(0.7, 0.1, t_max=200.0)
    cfg = SimConfig(dt=0.01, seed=9, n_traj=800)
    mc_b = mfpt_monte_carlo(PANEL_B, spec, cfg).mean_fpt
    mc_c = mfpt_monte_carlo(PANEL_C, spec, cfg).mean_fpt
    assert mc_c < mc_b
