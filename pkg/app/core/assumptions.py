"""
Checks for the four conditions under which the stochastic GLV process has a
unique positive solution, bounded moments and an ergodic stationary law.
"""

import logging
from typing import Optional

import numpy as np

from app.core.exceptions import DimensionError, SingularMatrixError
from app.core.numerics import as_dense_matrix, lp_feasible, solve_linear, sym_max_eig
from app.models.assumptions import (
    A1Report, A2Report, A3Report, A4Report, AssumptionReport, PhiInterval,
)
from app.models.params import ModelParams
from config.config import Config

logger = logging.getLogger(__name__)

PHI_MIN = 4.0


def check_a1(params: ModelParams, x0, tol: Optional[float] = None) -> A1Report:
    """
    Positive start, positive noise, positive corrected growth and a
    non-positive definite interaction matrix.

    Definiteness is read off the symmetric part, since x'Ax = x'((A + A')/2)x.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.n_species,):
        raise DimensionError(f"x0 must have length {params.n_species}, got {x0.shape}")
    tol = Config.PSD_TOLERANCE if tol is None else tol

    eig = sym_max_eig((params.a + params.a.T) / 2)
    x0_ok = bool(np.all(x0 > 0))
    sigma_ok = bool(np.all(params.sigma > 0))
    growth_ok = bool(np.all(params.big_r > 0))
    return A1Report(
        passed=x0_ok and sigma_ok and growth_ok and eig <= tol,
        sym_max_eig=eig,
        x0_positive=x0_ok,
        sigma_positive=sigma_ok,
        growth_positive=growth_ok,
        tolerance=tol,
    )


def check_a2(a) -> A2Report:
    """
    Find every phi >= 4 with
    a_kk + phi/(phi+1) P_k + 1/(phi+1) Q_k < 0 for all k,
    where P_k and Q_k are the positive parts of row k and column k.

    Multiplying by phi + 1 gives phi (a_kk + P_k) < -(a_kk + Q_k), one linear
    inequality per row, so the feasible set is an interval.
    """
    a = as_dense_matrix(a, "interaction matrix")
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"interaction matrix must be square, got {a.shape}")

    pos = np.maximum(a, 0.0)
    diag = np.diag(a)
    slope = diag + pos.sum(axis=1)
    bound = -(diag + pos.sum(axis=0))

    lower, lower_closed = PHI_MIN, True
    upper = None
    for alpha, beta in zip(slope, bound):
        if alpha > 0:
            cap = beta / alpha
            upper = cap if upper is None else min(upper, cap)
        elif alpha < 0:
            floor = beta / alpha
            if floor >= lower:
                lower, lower_closed = floor, False
        elif beta <= 0:
            return A2Report(passed=False)

    if upper is not None and not lower < upper:
        return A2Report(passed=False)
    return A2Report(
        passed=True,
        phi_interval=PhiInterval(lower=float(lower), upper=upper, lower_closed=lower_closed),
    )


def check_a3(params: ModelParams) -> A3Report:
    """Interior equilibrium x~ = -A^{-1}(r - sigma^2/2) must be strictly positive."""
    try:
        x_tilde = -solve_linear(params.a, params.big_r)
    except SingularMatrixError as e:
        logger.info("equilibrium undefined: %s", e.message)
        return A3Report(passed=False, status="equilibrium_undefined")
    return A3Report(passed=bool(np.all(x_tilde > 0)), x_tilde=x_tilde.tolist())


def a4_constraint_matrix(params: ModelParams, x_tilde) -> np.ndarray:
    """
    Row k holds the coefficients of c in

        sum_i c_i s2_i x~_i + [2 c_k a_kk + sum_{l!=k} (c_k |a_kl| + c_l |a_lk|)] x~_k^2,

    which must be negative for every k.
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    n = params.n_species
    if x_tilde.shape != (n,):
        raise DimensionError(f"x_tilde must have length {n}, got {x_tilde.shape}")

    abs_a = np.abs(params.a)
    off = abs_a - np.diag(np.diag(abs_a))
    g = np.tile(params.sigma2 * x_tilde, (n, 1))
    for k in range(n):
        coeff = off[:, k].copy()  # c_l |a_lk|
        coeff[k] = 2 * params.a[k, k] + off[k].sum()
        g[k] += coeff * x_tilde[k] ** 2
    return g


def check_a4(params: ModelParams, x_tilde, lower_bound: Optional[float] = None) -> A4Report:
    """Search the simplex for positive weights c satisfying all N inequalities."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    if np.any(x_tilde <= 0):
        return A4Report(passed=False, status="not_evaluated")

    g = a4_constraint_matrix(params, x_tilde)
    result = lp_feasible(g, lower_bound=lower_bound)
    if result.status != "optimal":
        logger.warning("Assumption 4 LP failed: %s", result.message)
        return A4Report(passed=False, status="solver_failure")

    witness = result.witness
    verified = bool(np.all(g @ witness < 0)) and bool(np.all(witness > 0))
    return A4Report(
        passed=result.feasible and verified,
        c_witness=witness.tolist(),
        margin=result.margin,
    )


def check_all(params: ModelParams, x0, tol: Optional[float] = None) -> AssumptionReport:
    """Run A1 through A4; A4 is only evaluated when A3 yields a positive x~."""
    a1 = check_a1(params, x0, tol=tol)
    a2 = check_a2(params.a)
    a3 = check_a3(params)
    notes = []
    if a3.passed:
        a4 = check_a4(params, a3.x_tilde)
    else:
        a4 = A4Report(passed=False, status="not_evaluated")
        notes.append("Assumption 4 requires a positive equilibrium and was not evaluated.")
    if a3.status == "equilibrium_undefined":
        notes.append("Interaction matrix is singular; the interior equilibrium is undefined.")
    return AssumptionReport(a1=a1, a2=a2, a3=a3, a4=a4, notes=notes)
