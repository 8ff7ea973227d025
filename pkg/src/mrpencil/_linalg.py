"""Small dense linear-algebra helpers shared by the analysis and simulation code.

Zero-dimension blocks appear whenever a partition leaves one class empty, so every
helper here accepts 0x0 matrices and returns correctly shaped empty results.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg as sla


class NumericalError(RuntimeError):
    """Base class for numerical failures (singular matrices, Newton divergence)."""


class SingularMatrixError(NumericalError):
    """Raised when a matrix that must be inverted is singular to working precision."""

    def __init__(self, what: str, cond: float, hint: str = ""):
        self.what = what
        self.cond = cond
        msg = f"{what} is singular (condition estimate {cond:.3e})"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


def condition_estimate(a: np.ndarray) -> float:
    """1-norm condition number, ``inf`` for exactly singular input."""
    if a.size == 0:
        return 1.0
    with np.errstate(all="ignore"):
        try:
            return float(np.linalg.cond(a, 1))
        except np.linalg.LinAlgError:
            return float("inf")


class LU:
    """LU factorization that tolerates empty matrices and rejects singular ones.

    Parameters
    ----------
    a : ndarray, shape (k, k)
        Matrix to factorize.
    what : str
        Name used in the error message.
    hint : str
        Optional remedy appended to the error message.
    """

    #: pivots below ``RCOND_FLOOR * ||a||`` are treated as exact zeros
    RCOND_FLOOR = 1e-14

    def __init__(self, a: np.ndarray, what: str = "matrix", hint: str = ""):
        a = np.asarray(a, dtype=float)
        self.order = a.shape[0]
        self._lu = None
        if self.order == 0:
            return
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"{what} has non-finite entries")
        scale = np.abs(a).max()
        with warnings.catch_warnings():
            # exact singularity is reported below as SingularMatrixError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(a, check_finite=False)
        if scale == 0.0 or np.abs(np.diag(lu)).min() <= self.RCOND_FLOOR * scale:
            raise SingularMatrixError(what, condition_estimate(a), hint)
        self._lu = (lu, piv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.order == 0:
            return np.zeros_like(b)
        return sla.lu_solve(self._lu, b, check_finite=False)


def solve(a: np.ndarray, b: np.ndarray, what: str = "matrix", hint: str = "") -> np.ndarray:
    """Solve ``a @ x = b`` for square ``a`` (possibly empty)."""
    return LU(a, what, hint).solve(b)
