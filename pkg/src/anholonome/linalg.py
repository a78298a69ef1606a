"""Dense direct solves with an explicit pivot threshold."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import RegularityError

PIVOT_TOL = 1e-12


def solve(A: np.ndarray, b: np.ndarray, *, what: str = "matrix", error=RegularityError) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivot LU, rejecting pivots below ``PIVOT_TOL``.

    An empty system returns an empty solution.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(b.shape, dtype=float)
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise error(f"non-finite entries in {what}")
    with warnings.catch_warnings():
        # exact zero pivots are reported below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= PIVOT_TOL:
        raise error(f"singular {what}: smallest pivot {pivots.min():.3e}")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
