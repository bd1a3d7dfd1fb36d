"""
Monte Carlo comparison of the SGLV and GLV estimators on simulated data, and
cross-validated one-step prediction errors on an observed series.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from sklearn.model_selection import ShuffleSplit

from app.core.exceptions import CollinearityError, DimensionError, ExplosionError
from app.core.inference import fit_glv_ls, fit_sglv_amle, predict_one_step
from app.core.numerics import RngStream
from app.core.simulator import simulate_observed
from app.models.experiment import (
    EstimatorErrors,
    McBlock,
    McConfig,
    McResult,
    MspeResult,
    MspeRow,
)
from app.models.params import ObservationSeries
from app.models.simulation import SimConfig
from config.config import Config

logger = logging.getLogger(__name__)

DEFAULT_K_GRID = (24, 12, 8)


def _ordered_map(fn: Callable, items: Sequence, jobs: int) -> List:
    """Map in a process pool when ``jobs > 1``; results keep the order of ``items``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def _mc_replicate(replicate: int, config: McConfig, n_obs: int) -> Dict:
    """Simulate one series, fit both estimators and return their squared errors."""
    params = config.params
    rng = RngStream(config.seed, replicate)
    sim = SimConfig(x0=config.x0, fine_dt=config.fine_dt, seed=config.seed,
                    stream_id=replicate)
    try:
        series = simulate_observed(params, sim, config.schedule.with_n_obs(n_obs), rng)
    except ExplosionError:
        return {"failure": "explosion"}
    try:
        sglv = fit_sglv_amle(series)
        glv = fit_glv_ls(series)
    except CollinearityError:
        return {"failure": "collinear"}
    except DimensionError:
        return {"failure": "dimension"}
    return {
        "sglv_a": (sglv.a_hat - params.a) ** 2,
        "sglv_r": (sglv.r_hat - params.r) ** 2,
        "sglv_sigma2": (sglv.sigma2_hat - params.sigma2) ** 2,
        "glv_a": (glv.a_hat - params.a) ** 2,
        "glv_r": (glv.r_hat - params.r) ** 2,
    }


def _mc_block(config: McConfig, n_obs: int, outcomes: List[Dict]) -> McBlock:
    failures: Dict[str, int] = {}
    kept = []
    for outcome in outcomes:
        if "failure" in outcome:
            failures[outcome["failure"]] = failures.get(outcome["failure"], 0) + 1
        else:
            kept.append(outcome)
    if failures:
        logger.warning("%s n=%d: excluded %d failed replicates %s", config.case_name, n_obs,
                       sum(failures.values()), failures)

    block = McBlock(case_name=config.case_name, n_obs=n_obs,
                    replicates=config.replicates, used=len(kept), failures=failures)
    if not kept:
        return block

    def stack(key):
        return np.stack([o[key] for o in kept])

    block.sglv = EstimatorErrors.from_squared_errors(stack("sglv_a"), stack("sglv_r"),
                                                     stack("sglv_sigma2"))
    block.glv = EstimatorErrors.from_squared_errors(stack("glv_a"), stack("glv_r"))
    return block


def run_mc_study(config: McConfig, jobs: Optional[int] = None) -> McResult:
    """
    Monte Carlo MSE of both estimators for every sample size in ``config.n_obs``.

    Replicate ``j`` draws its schedule and path from the stream ``(seed, j)`` for
    every sample size. Replicates whose path explodes or whose design is rank
    deficient are excluded and counted.
    """
    jobs = Config.JOBS if jobs is None else jobs
    result = McResult(config=config)
    replicates = list(range(config.replicates))
    for n_obs in config.n_obs:
        logger.info("Monte Carlo %s: n=%d, %d replicates", config.case_name, n_obs,
                    config.replicates)
        outcomes = _ordered_map(partial(_mc_replicate, config=config, n_obs=n_obs),
                                replicates, jobs)
        result.blocks.append(_mc_block(config, n_obs, outcomes))
    return result


def crossval_splits(n_obs: int, k: int, n_splits: int, random_state: int) -> List[np.ndarray]:
    """
    Test index sets of ``ceil(n/k)`` points drawn uniformly from 1..n-1.

    Index 0 has no predecessor and always stays in the training set.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    test_size = math.ceil(n_obs / k)
    candidates = np.arange(1, n_obs)
    if test_size >= candidates.size:
        raise DimensionError(f"series of {n_obs} points is too short for k={k}")
    splitter = ShuffleSplit(n_splits=n_splits, test_size=test_size,
                            random_state=random_state)
    return [np.sort(candidates[test]) for _, test in splitter.split(candidates)]


def training_transitions(n_obs: int, test: np.ndarray) -> np.ndarray:
    """Left indices i of the pairs (i, i+1) with both points in the training set."""
    train = np.ones(n_obs, dtype=bool)
    train[test] = False
    return np.flatnonzero(train[:-1] & train[1:])


def _split_errors(test: np.ndarray, series: ObservationSeries) -> Optional[Dict]:
    """Species-summed squared one-step log errors averaged over the test points."""
    transitions = training_transitions(series.n_obs, test)
    try:
        fits = {"sglv": fit_sglv_amle(series, transitions),
                "glv": fit_glv_ls(series, transitions)}
    except (CollinearityError, DimensionError) as e:
        logger.debug("dropping split: %s", e)
        return None

    u = series.log_values
    dt = series.times[test] - series.times[test - 1]
    errors = {}
    for name, fit in fits.items():
        predicted = predict_one_step(fit, u[test - 1], dt)
        errors[name] = float(np.mean(np.sum((u[test] - predicted) ** 2, axis=1)))
    return errors


def _mean_se(values: Iterable[float]):
    values = np.asarray(list(values), dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def run_crossval(series: ObservationSeries, k: int, n_splits: int = 100,
                 rng: Optional[RngStream] = None, jobs: Optional[int] = None) -> MspeResult:
    """
    Cross-validated one-step mean squared prediction error of both models.

    Each split holds out ``ceil(n/k)`` points, fits on the remaining consecutive
    pairs and predicts every held-out point from the observed point before it.
    Splits with a rank-deficient training design are dropped and counted.
    """
    jobs = Config.JOBS if jobs is None else jobs
    rng = rng or RngStream(Config.DEFAULT_SEED)
    splits = crossval_splits(series.n_obs, k, n_splits, rng.child_seed())
    outcomes = _ordered_map(partial(_split_errors, series=series), splits, jobs)

    kept = [o for o in outcomes if o is not None]
    dropped = len(outcomes) - len(kept)
    if dropped:
        logger.warning("k=%d: dropped %d of %d splits", k, dropped, n_splits)
    if not kept:
        raise CollinearityError(f"every cross-validation split for k={k} was rank deficient")

    sglv_mean, sglv_se = _mean_se(o["sglv"] for o in kept)
    glv_mean, glv_se = _mean_se(o["glv"] for o in kept)
    row = MspeRow(k=k, n_splits=n_splits, splits_used=len(kept), splits_dropped=dropped,
                  sglv_mean=sglv_mean, sglv_se=sglv_se, glv_mean=glv_mean, glv_se=glv_se)
    logger.info("k=%d: MSPE SGLV %.4f (%.4f), GLV %.4f (%.4f)", k, sglv_mean, sglv_se,
                glv_mean, glv_se)
    return MspeResult(rows=[row])


def run_crossval_grid(series: ObservationSeries, k_values: Sequence[int] = DEFAULT_K_GRID,
                      n_splits: int = 100, rng: Optional[RngStream] = None,
                      jobs: Optional[int] = None) -> MspeResult:
    """run_crossval for each k, drawing every split seed from one stream in order."""
    rng = rng or RngStream(Config.DEFAULT_SEED)
    rows = []
    for k in k_values:
        rows.extend(run_crossval(series, k, n_splits, rng, jobs).rows)
    return MspeResult(rows=rows)
