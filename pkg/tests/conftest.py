"""Shared fixtures: reference parameters and cached forward runs."""

import numpy as np
import pytest

from quenchlab.config import ProtocolSettings, RunConfig
from quenchlab.field import FieldParameters, mode_basis
from quenchlab.quench import QuenchProtocol, simulate_protocol


@pytest.fixture(scope="session")
def params():
    return FieldParameters()


@pytest.fixture(scope="session")
def params_dirichlet():
    return FieldParameters(bc="dirichlet")


@pytest.fixture(scope="session")
def basis(params):
    return mode_basis(params)


@pytest.fixture(scope="session")
def default_times():
    return tuple(np.linspace(0.0, 65.0, 14))


@pytest.fixture(scope="session")
def truth_run(params, default_times):
    """Noiseless forward run on the default grid."""
    proto = QuenchProtocol(
        params=params, time_grid_ms=default_times, shots_per_time=2, seed=11
    )
    return simulate_protocol(proto, with_shots=False)


@pytest.fixture(scope="session")
def truth_run_dirichlet(params_dirichlet, default_times):
    proto = QuenchProtocol(
        params=params_dirichlet, time_grid_ms=default_times, shots_per_time=2, seed=11
    )
    return simulate_protocol(proto, with_shots=False)


@pytest.fixture(scope="session")
def dense_config():
    """Tomography-grade grid: 2.5 ms spacing, 14 hold times per window."""
    return RunConfig(
        protocol=ProtocolSettings(n_times=27, shots_per_time=500, seed=101)
    ).validate()
