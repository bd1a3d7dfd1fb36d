"""
Dense linear algebra, the small LP behind the Assumption 4 check, and the
seeded random-number contract used by every simulation and resampling routine.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from app.core.exceptions import DimensionError, SingularMatrixError
from config.config import Config

logger = logging.getLogger(__name__)


def as_dense_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (the package's dense matrix type)."""
    arr = np.array(m, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def solve_linear(m, rhs, tol: Optional[float] = None) -> np.ndarray:
    """
    Solve ``m @ X = rhs`` by LU factorization with partial pivoting.

    Args:
        m: Square coefficient matrix
        rhs: Right-hand side, a vector or a matrix with ``m.shape[0]`` rows
        tol: Relative pivot tolerance; defaults to ``Config.SINGULAR_TOLERANCE``

    Returns:
        np.ndarray: Solution with the same trailing shape as ``rhs``

    Raises:
        SingularMatrixError: if a pivot is below ``tol`` times the largest entry of ``m``
    """
    m = as_dense_matrix(m, "coefficient matrix")
    rhs = np.asarray(rhs, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"coefficient matrix must be square, got {m.shape}")
    if rhs.shape[0] != m.shape[0]:
        raise DimensionError(
            f"right-hand side has {rhs.shape[0]} rows, expected {m.shape[0]}"
        )
    tol = Config.SINGULAR_TOLERANCE if tol is None else tol

    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("coefficient matrix is zero", pivot=0)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    small = np.flatnonzero(~(pivots > tol * scale))
    if small.size:
        raise SingularMatrixError("matrix is singular to working tolerance", pivot=int(small[0]))

    return linalg.lu_solve((lu, piv), rhs, check_finite=False)


def sym_max_eig(m) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    m = as_dense_matrix(m, "symmetric matrix")
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * scale:
        raise DimensionError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(m)[-1])


@dataclass
class LpResult:
    """Outcome of the max-slack feasibility LP"""
    feasible: bool
    status: str
    witness: Optional[np.ndarray] = None
    margin: Optional[float] = None
    message: str = ""


def lp_feasible(constraint_matrix, lower_bound: Optional[float] = None) -> LpResult:
    """
    Look for ``c`` with ``constraint_matrix @ c < 0`` on the simplex.

    Solves ``min t`` subject to ``G c <= t``, ``sum(c) = 1`` and ``c >= lower_bound``
    with the HiGHS dual simplex, so the witness is a vertex of the polytope.
    The system is feasible iff the optimal ``t`` is negative; ``t`` is returned as
    ``margin``.
    """
    g = as_dense_matrix(constraint_matrix, "constraint matrix")
    n_rows, n_vars = g.shape
    eps = Config.A4_LOWER_BOUND if lower_bound is None else lower_bound
    if n_vars * eps >= 1:
        raise DimensionError(f"lower bound {eps} is infeasible for {n_vars} variables")

    # variables: c_1..c_N, t
    cost = np.zeros(n_vars + 1)
    cost[-1] = 1.0
    a_ub = np.hstack([g, -np.ones((n_rows, 1))])
    b_ub = np.zeros(n_rows)
    a_eq = np.hstack([np.ones((1, n_vars)), np.zeros((1, 1))])
    b_eq = np.ones(1)
    bounds = [(eps, None)] * n_vars + [(None, None)]

    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs-ds")
    if res.status != 0 or res.x is None:
        logger.debug("LP solver stopped with status %s: %s", res.status, res.message)
        return LpResult(feasible=False, status="solver_failure", message=str(res.message))

    witness = np.asarray(res.x[:n_vars], dtype=float)
    margin = float(res.x[-1])
    slack = g @ witness
    if np.any(slack > margin + 1e-9):
        # never report an optimum that does not satisfy its own constraints
        return LpResult(feasible=False, status="solver_failure",
                        message="witness violates the reported margin")

    return LpResult(feasible=margin < 0, status="optimal", witness=witness, margin=margin)


@dataclass
class RngStream:
    """
    Reproducible random stream identified by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator keyed through a SeedSequence whose
    spawn key is the stream id, so distinct streams of one seed are independent and
    identical pairs give identical draws on every platform.
    """
    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64 or not 0 <= self.stream_id < 2**64:
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child_seed(self) -> int:
        """Draw a 32-bit seed for libraries that only accept integer seeds."""
        return int(self.generator.integers(0, 2**32 - 1))


def standard_normals(rng: RngStream, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. N(0, 1) values from the stream."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return rng.generator.standard_normal(count)
