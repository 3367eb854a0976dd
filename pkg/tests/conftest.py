import numpy as np
import pytest

from severity_sde.calibration import fit_params, increments_from_ensemble, IncrementDataset
from severity_sde.model import PANEL_C, ModelParams
from severity_sde.sde import SimConfig, simulate_ensemble

# criterion lines collected by test_acceptance.py
ACCEPTANCE_LINES = []

FIT_INIT = ModelParams(alpha=0.1, beta=0.1, gamma=0.1, sigma0=0.1, sigma1=0.1)


def wide_range_increments(p, n_per_start, dt=0.01, n_steps=1000):
    """Interior increments from ensembles started across the whole range.

    Ten ensembles start at x0 = 0.05, 0.15, ..., 0.95 with seed families
    11 + k * 100000, so a smaller ``n_per_start`` gives a prefix of a larger one.
    """
    parts = []
    for k, x0 in enumerate(np.linspace(0.05, 0.95, 10)):
        cfg = SimConfig(dt=dt, n_steps=n_steps, x0=float(x0), seed=11 + k * 100_000, n_traj=n_per_start)
        parts.append(increments_from_ensemble(simulate_ensemble(p, cfg), sigma=p))
    return IncrementDataset.concatenate(parts)


@pytest.fixture(scope="session")
def panel_c_data_1e6():
    # 101 paths per start clears 10^6 interior records
    return wide_range_increments(PANEL_C, 101)


@pytest.fixture(scope="session")
def panel_c_data_1e5():
    return wide_range_increments(PANEL_C, 10)


@pytest.fixture(scope="session")
def panel_c_fit_1e6(panel_c_data_1e6):
    return fit_params(panel_c_data_1e6, FIT_INIT)


@pytest.fixture(scope="session")
def panel_c_fit_1e5(panel_c_data_1e5):
    return fit_params(panel_c_data_1e5, FIT_INIT)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
