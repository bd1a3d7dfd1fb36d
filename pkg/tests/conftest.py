"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest

from app.models.experiment import CASE1_X0, case1_params
from app.models.params import ModelParams, ObservationSeries


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow statistical acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def euler_series(growth, a, u0, gaps, noise=None) -> ObservationSeries:
    """
    Observations generated exactly by u_{i+1} = u_i + (R + A exp(u_i)) D_i (+ noise_i).
    """
    growth = np.atleast_1d(np.asarray(growth, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    gaps = np.asarray(gaps, dtype=float)
    u = np.empty((gaps.size + 1, growth.size))
    u[0] = u0
    for i, dt in enumerate(gaps):
        u[i + 1] = u[i] + (growth + a @ np.exp(u[i])) * dt
        if noise is not None:
            u[i + 1] += noise[i]
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    return ObservationSeries(times=times, values=np.exp(u))


@pytest.fixture
def make_euler_series():
    return euler_series


@pytest.fixture
def irregular_gaps():
    rng = np.random.default_rng(11)
    return rng.choice([0.1, 0.3, 0.5], size=60, p=[0.7, 0.2, 0.1])


@pytest.fixture
def case1():
    return case1_params()


@pytest.fixture
def case1_x0():
    return np.array(CASE1_X0)


@pytest.fixture
def identity2():
    return ModelParams(r=[1.0, 1.0], a=-np.eye(2), sigma=[0.3, 0.3])


@pytest.fixture
def noiseless_two_species(make_euler_series, irregular_gaps):
    """Exact-Euler data from a stable two-species system"""
    growth = np.array([0.8, 0.6])
    a = np.array([[-1.5, 0.4], [-0.3, -1.2]])
    series = make_euler_series(growth, a, np.log([0.05, 0.9]), irregular_gaps)
    return series, growth, a
