"""Periodic (cyclic) tridiagonal solves."""

import numpy as np
from scipy import linalg

from .errors import NumericalFailureError


def solve_cyclic_tridiagonal(
    lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Solve A x = rhs for a tridiagonal matrix with periodic corners.

    lower[i] = A[i, i-1 mod n], upper[i] = A[i, i+1 mod n]. The corner entries make A
    a rank-one update of a banded matrix; Sherman-Morrison reduces the problem to
    one banded solve with two right-hand sides.
    """
    n = diag.size
    if n < 3:
        raise NumericalFailureError(f"cyclic system needs at least 3 unknowns, got {n}")
    gamma = -diag[0]
    if gamma == 0.0:
        raise NumericalFailureError("cyclic system has a zero leading diagonal entry")
    bands = np.zeros((3, n))
    bands[0, 1:] = upper[:-1]
    bands[1] = diag
    bands[1, 0] -= gamma
    bands[1, -1] -= lower[0] * upper[-1] / gamma
    bands[2, :-1] = lower[1:]

    u = np.zeros(n)
    u[0] = gamma
    u[-1] = upper[-1]
    try:
        solved = linalg.solve_banded((1, 1), bands, np.column_stack([rhs, u]))
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"cyclic tridiagonal solve failed: {exc}") from exc
    y, z = solved[:, 0], solved[:, 1]
    # v = (1, 0, ..., 0, lower[0] / gamma)
    vy = y[0] + lower[0] * y[-1] / gamma
    vz = z[0] + lower[0] * z[-1] / gamma
    denom = 1.0 + vz
    if denom == 0.0:
        raise NumericalFailureError("cyclic tridiagonal system is singular")
    x = y - z * (vy / denom)
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError("cyclic tridiagonal solve produced non-finite values")
    return x
