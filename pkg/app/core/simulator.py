"""
Sample paths of the stochastic GLV model.

Paths are generated in log space, u = log x, with the Euler scheme

    u_k(t + dt) = u_k(t) + [R_k + sum_l a_kl exp(u_l(t))] dt + sigma_k sqrt(dt) eps_k,

so every emitted abundance is positive. Observations are read off the fine
grid at exact grid indices.
"""

import logging
import math
from typing import Optional

import numpy as np

from app.core.exceptions import DimensionError, ExplosionError, PositivityError
from app.core.numerics import RngStream, standard_normals
from app.models.params import ModelParams, ObservationSeries
from app.models.simulation import FineTrajectory, SamplingSchedule, SimConfig

logger = logging.getLogger(__name__)

# exp(u) overflows float64 just above u = 709.78
_LOG_OVERFLOW = 700.0


def sample_schedule(schedule: SamplingSchedule, rng: RngStream) -> np.ndarray:
    """Observation times starting at 0 with i.i.d. gaps."""
    gaps = rng.generator.choice(np.asarray(schedule.gaps, dtype=float),
                                size=schedule.n_obs - 1,
                                p=np.asarray(schedule.probs, dtype=float))
    return np.concatenate([[0.0], np.cumsum(gaps)])


def simulate_log_euler(params: ModelParams, config: SimConfig, horizon: float,
                       rng: Optional[RngStream] = None) -> FineTrajectory:
    """
    Euler path of u = log x on the grid 0, dt, ..., horizon.

    Raises:
        ExplosionError: if exp(u) would overflow
    """
    n = params.n_species
    if config.x0.shape != (n,):
        raise DimensionError(f"x0 must have length {n}, got {config.x0.shape}")
    rng = rng or RngStream(config.seed, config.stream_id)
    dt = config.fine_dt
    steps = config.steps_for(horizon)

    shocks = (standard_normals(rng, steps * n).reshape(steps, n)
              * (params.sigma * math.sqrt(dt)))
    growth = params.big_r
    a = params.a

    path = np.empty((steps + 1, n))
    u = np.log(config.x0)
    path[0] = u
    for i in range(steps):
        u = u + (growth + a @ np.exp(u)) * dt + shocks[i]
        if not u.max() < _LOG_OVERFLOW:
            raise ExplosionError("simulated path exploded", step=i + 1)
        path[i + 1] = u

    return FineTrajectory(times=np.arange(steps + 1) * dt, log_values=path)


def simulate_observed(params: ModelParams, config: SimConfig, schedule: SamplingSchedule,
                      rng: Optional[RngStream] = None) -> ObservationSeries:
    """
    Draw an observation schedule, simulate on the fine grid up to its last time
    and return the abundances at the scheduled grid points.
    """
    rng = rng or RngStream(config.seed, config.stream_id)
    times = sample_schedule(schedule, rng)
    steps = np.array([config.steps_for(g) for g in np.diff(times)], dtype=int)
    index = np.concatenate([[0], np.cumsum(steps)])

    trajectory = simulate_log_euler(params, config, index[-1] * config.fine_dt, rng)
    return ObservationSeries(times=trajectory.times[index],
                             values=np.exp(trajectory.log_values[index]))


def glv_vector_field(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """dx/dt = x (r + A x)"""
    return x * (params.r + params.a @ x)


def deterministic_glv_flow(params: ModelParams, x0, t_end: float, dt: float) -> np.ndarray:
    """
    Integrate the deterministic GLV system with classical fourth-order
    Runge-Kutta and return the state at ``t_end``.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (params.n_species,):
        raise DimensionError(f"x0 must have length {params.n_species}, got {x.shape}")
    if np.any(x <= 0):
        raise PositivityError("initial state must be strictly positive")
    if t_end == 0:
        return x
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / steps

    for i in range(steps):
        k1 = glv_vector_field(params, x)
        k2 = glv_vector_field(params, x + h / 2 * k1)
        k3 = glv_vector_field(params, x + h / 2 * k2)
        k4 = glv_vector_field(params, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.all(np.isfinite(x)) and np.all(x > 0)):
            raise PositivityError(f"deterministic path left the positive orthant at step {i + 1}")
    return x
