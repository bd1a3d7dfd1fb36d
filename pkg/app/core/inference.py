"""
Estimators for the stochastic GLV model from irregularly spaced observations.

Writing u = log x, g_i = (1, x_1(t_i), ..., x_N(t_i)) and D_i = t_{i+1} - t_i,
the Euler transition of species k is Gaussian with mean (R_k + a_k . x(t_i)) D_i
and variance sigma_k^2 D_i. Maximizing the resulting likelihood in the drift is a
weighted regression of du_k / D on g with weights D; the GLV baseline is the same
regression without weights.
"""

import logging
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm
from sklearn.linear_model import LinearRegression

from app.core.exceptions import CollinearityError, DimensionError, SingularMatrixError
from app.core.numerics import RngStream, solve_linear
from app.models.fit import ConfidenceIntervals, GlvFit, SglvFit
from app.models.params import ModelParams, ObservationSeries
from config.config import Config

logger = logging.getLogger(__name__)

# relative singular-value cutoff for declaring the design rank deficient
_RANK_TOL = 1e-10


def _increments(series: ObservationSeries,
                transitions=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Left-point abundances, log increments and gaps of a series.

    ``transitions`` optionally restricts the result to the pairs (i, i+1) whose
    left index i is listed.
    """
    x, du, gaps = series.values[:-1], np.diff(series.log_values, axis=0), series.gaps
    if transitions is not None:
        idx = np.asarray(transitions, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= series.n_obs - 1):
            raise DimensionError("transition index out of range")
        x, du, gaps = x[idx], du[idx], gaps[idx]
    return x, du, gaps


def _check_design(x: np.ndarray, weights: np.ndarray, names: List[str]) -> None:
    """Raise CollinearityError when (1, x) weighted by sqrt(weights) is rank deficient."""
    n_rows, n_cols = x.shape
    if n_rows < n_cols + 2:
        raise DimensionError(
            f"need at least {n_cols + 3} observations for {n_cols} species, got {n_rows + 1}"
        )
    design = np.hstack([np.ones((n_rows, 1)), x]) * np.sqrt(weights)[:, None]
    design = design / np.linalg.norm(design, axis=0)
    _, s, vt = np.linalg.svd(design, full_matrices=False)
    null = s <= _RANK_TOL * s[0]
    if np.any(null):
        columns = ["intercept"] + list(names)
        weight = np.abs(vt[null]).max(axis=0)
        involved = [c for c, w in zip(columns, weight) if w > 1e-6]
        raise CollinearityError("design matrix is rank deficient in columns", involved)


def _regress(x: np.ndarray, y: np.ndarray,
             weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-species least squares of y on (1, x); returns (intercepts, coefficient rows)."""
    model = LinearRegression(fit_intercept=True)
    model.fit(x, y, sample_weight=weights)
    return np.atleast_1d(model.intercept_), np.atleast_2d(model.coef_)


def fit_sglv_amle(series: ObservationSeries, transitions=None) -> SglvFit:
    """
    Approximate maximum likelihood estimates of (R, A, sigma^2).

    With ``transitions`` only the listed consecutive pairs enter the likelihood.

    Raises:
        CollinearityError: if the design (1, x_1, ..., x_N) is rank deficient
    """
    x, du, gaps = _increments(series, transitions)
    _check_design(x, gaps, series.labels)

    growth, a_hat = _regress(x, du / gaps[:, None], weights=gaps)
    residuals = du - (growth + x @ a_hat.T) * gaps[:, None]
    n_incr = gaps.shape[0]
    sigma2 = np.sum(residuals ** 2 / gaps[:, None], axis=0) / n_incr
    r_hat = growth + sigma2 / 2

    loglik = None
    if np.all(sigma2 > 0):
        loglik = _loglik_from_residuals(residuals, gaps, sigma2)

    logger.debug("AMLE fit on %d increments, sigma2=%s", n_incr, sigma2)
    return SglvFit(
        r_hat=r_hat,
        a_hat=a_hat,
        sigma2_hat=sigma2,
        R_hat=growth,
        loglik=loglik,
        fisher=fisher_information(series, transitions=transitions),
        n_obs=n_incr + 1,
        total_time=float(gaps.sum()),
        species=series.species,
    )


def closed_form_LM(series: ObservationSeries,
                   transitions=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    The L and M matrices of the closed-form drift estimator:

        L_ls = T sum_i x_l x_s D_i - (sum_i x_l D_i)(sum_i x_s D_i)
        M_kp = (u_k(t_n) - u_k(t_1)) sum_i x_p D_i - T sum_i du_k x_p

    with T = sum_i D_i. On a transition subset u_k(t_n) - u_k(t_1) becomes
    sum_i du_k. Eliminating R from the normal equations gives L a_k' = -M_k'
    for every species row k.
    """
    x, du, gaps = _increments(series, transitions)
    total = gaps.sum()
    first_moment = x.T @ gaps
    second_moment = (x * gaps[:, None]).T @ x
    l_mat = total * second_moment - np.outer(first_moment, first_moment)
    m_mat = np.outer(du.sum(axis=0), first_moment) - total * (du.T @ x)
    return l_mat, m_mat


def closed_form_drift(series: ObservationSeries,
                      transitions=None) -> Tuple[np.ndarray, np.ndarray]:
    """Drift estimate (R, A) obtained from L and M instead of the regression."""
    l_mat, m_mat = closed_form_LM(series, transitions)
    a_hat = -solve_linear(l_mat, m_mat.T).T
    x, du, gaps = _increments(series, transitions)
    growth = (du.sum(axis=0) - a_hat @ (x.T @ gaps)) / gaps.sum()
    return growth, a_hat


def fisher_information(series: ObservationSeries, fit: Optional[SglvFit] = None,
                       transitions=None) -> np.ndarray:
    """
    Empirical information I_k = T^{-1} sum_i D_i g_i g_i' for each species.

    The drift gradient g_i does not depend on k, so all N matrices coincide.
    """
    if fit is not None:
        series.check_species(fit.n_species)
    x, _, gaps = _increments(series, transitions)
    g = np.hstack([np.ones((x.shape[0], 1)), x])
    info = (g * gaps[:, None]).T @ g / gaps.sum()
    info = (info + info.T) / 2
    return np.repeat(info[None, :, :], series.n_species, axis=0)


def confidence_intervals(fit: SglvFit, level: float = 0.95) -> ConfidenceIntervals:
    """
    Wald intervals a_kl +/- z sigma_k sqrt(diag(I_k^{-1})_l / T).

    Species whose information matrix is singular get NaN bounds and the
    status ``information_singular``.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    z = norm.ppf(0.5 + level / 2)
    n = fit.n_species
    estimate = np.hstack([fit.r_hat[:, None], fit.a_hat])
    lower = np.full_like(estimate, np.nan)
    upper = np.full_like(estimate, np.nan)
    status = []
    for k in range(n):
        info = fit.fisher[k]
        try:
            inv_diag = np.diag(solve_linear(info, np.eye(info.shape[0])))
        except SingularMatrixError:
            logger.warning("information matrix of species %s is singular", fit.labels[k])
            status.append("information_singular")
            continue
        half = z * np.sqrt(fit.sigma2_hat[k]) * np.sqrt(np.maximum(inv_diag, 0) / fit.total_time)
        lower[k] = estimate[k] - half
        upper[k] = estimate[k] + half
        status.append("ok")
    return ConfidenceIntervals(level=level, method="wald", estimate=estimate,
                               lower=lower, upper=upper, status=status,
                               species=fit.species)


def fit_glv_ls(series: ObservationSeries, transitions=None) -> GlvFit:
    """Deterministic GLV by gradient matching: OLS of du/D on (1, x) per species."""
    x, du, gaps = _increments(series, transitions)
    _check_design(x, np.ones_like(gaps), series.labels)
    slopes = du / gaps[:, None]
    growth, a_hat = _regress(x, slopes)
    residual_ss = float(np.sum((slopes - growth - x @ a_hat.T) ** 2))
    return GlvFit(r_hat=growth, a_hat=a_hat, residual_ss=residual_ss, species=series.species)


def predict_one_step(fit: Union[SglvFit, GlvFit], u_prev, dt) -> np.ndarray:
    """
    Euler conditional mean of the next log-abundance:
    u + (R + A exp(u)) dt, with r in place of R for the deterministic model.

    ``u_prev`` may be a single state or a stack of states with one ``dt`` each.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be positive")
    if u_prev.shape[-1] != fit.n_species:
        raise DimensionError(f"state must have {fit.n_species} entries")
    drift = fit.drift_growth + np.exp(u_prev) @ fit.a_hat.T
    if u_prev.ndim == 2 and dt.ndim == 1:
        dt = dt[:, None]
    return u_prev + drift * dt


def _loglik_from_residuals(residuals: np.ndarray, gaps: np.ndarray,
                           sigma2: np.ndarray) -> float:
    n_incr = residuals.shape[0]
    quad = np.sum(residuals ** 2 / gaps[:, None], axis=0) / sigma2
    return float(-np.sum(n_incr * np.log(sigma2) + quad))


def approx_loglik(params: ModelParams, sigma2, series: ObservationSeries) -> float:
    """
    Euler log-likelihood with constants dropped:

        -sum_k [(n-1) log s2_k + sum_i (du_k - (R_k + a_k . x) D_i)^2 / (s2_k D_i)]

    where R_k = r_k - s2_k / 2 is built from ``params.r`` and the given ``sigma2``.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    series.check_species(params.n_species)
    if sigma2.shape != (params.n_species,):
        raise DimensionError(f"sigma2 must have length {params.n_species}")
    if np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be strictly positive")
    x, du, gaps = _increments(series)
    growth = params.r - sigma2 / 2
    residuals = du - (growth + x @ params.a.T) * gaps[:, None]
    return _loglik_from_residuals(residuals, gaps, sigma2)


def bootstrap_ci_glv(series: ObservationSeries, fit: GlvFit,
                     B: Optional[int] = None, level: float = 0.95,
                     rng: Optional[RngStream] = None) -> ConfidenceIntervals:
    """
    Residual-bootstrap percentile intervals for the gradient-matching fit.

    Residuals of each species are resampled with replacement, added back to the
    fitted slopes and the regression is refitted; replicates with non-finite
    estimates are dropped and counted.
    """
    B = Config.BOOTSTRAP_REPLICATES if B is None else B
    if B < 100:
        raise ValueError("B must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = rng or RngStream(Config.DEFAULT_SEED)

    x, du, gaps = _increments(series)
    slopes = du / gaps[:, None]
    fitted = fit.r_hat + x @ fit.a_hat.T
    resid = slopes - fitted
    m, n = slopes.shape

    estimate = np.hstack([fit.r_hat[:, None], fit.a_hat])
    lower = np.empty_like(estimate)
    upper = np.empty_like(estimate)
    alpha = 1 - level
    dropped = 0
    for k in range(n):
        draw = rng.generator.integers(0, m, size=(m, B))
        targets = fitted[:, k][:, None] + resid[draw, k]
        intercepts, coefs = _regress(x, targets)
        boot = np.hstack([intercepts[:, None], coefs])
        finite = np.all(np.isfinite(boot), axis=1)
        dropped += int(np.sum(~finite))
        boot = boot[finite]
        lo, hi = np.quantile(boot, [alpha / 2, 1 - alpha / 2], axis=0)
        # percentile endpoints are widened to cover the point estimate
        lower[k] = np.minimum(lo, estimate[k])
        upper[k] = np.maximum(hi, estimate[k])

    if dropped:
        logger.warning("dropped %d bootstrap refits with non-finite estimates", dropped)
    return ConfidenceIntervals(level=level, method="residual_bootstrap", estimate=estimate,
                               lower=lower, upper=upper, status=["ok"] * n,
                               species=series.species, dropped=dropped, replicates=B)
