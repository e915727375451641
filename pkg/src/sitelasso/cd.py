"""Cyclic coordinate descent for the lasso, used as a reference solver.

Minimizes  sum_i (y_i - sum_j X_ij b_j)^2 + lam * sum_j |b_j|  for a fixed
lam, the same parametrization the path solver emits knots in (so a path knot
at lambda should reproduce coordinate descent run at that lambda). Kept
deliberately independent of the path solver: different algorithm, different
code, shared only by the objective.

The sweep kernel is a hot loop (hundreds of sweeps per call, one call per
path knot in the oracle tests) and carries the optional numba compilation
from :mod:`._accel`.
"""

import numpy as np

from ._accel import maybe_njit
from .errors import DataError, NumericalError


def _cd_sweeps(X, col_sq, y, lam, beta, max_sweeps, tol):
    # One function, two execution modes: compiled by numba when enabled,
    # otherwise the same code runs as numpy calls per coordinate.
    n, p = X.shape
    r = y - X @ beta
    half = 0.5 * lam
    for sweep in range(max_sweeps):
        worst = 0.0
        for j in range(p):
            old = beta[j]
            z = X[:, j] @ r + col_sq[j] * old
            if z > half:
                new = (z - half) / col_sq[j]
            elif z < -half:
                new = (z + half) / col_sq[j]
            else:
                new = 0.0
            step = new - old
            if step != 0.0:
                r -= X[:, j] * step
                beta[j] = new
            mag = abs(step)
            if mag > worst:
                worst = mag
        if worst < tol:
            return sweep + 1
    return -1


_cd_sweeps_kernel = maybe_njit(_cd_sweeps)


def cd_lasso(X, y, lam, beta_init=None, max_sweeps=200_000, tol=1e-12):
    """Solve the lasso at one penalty value by cyclic coordinate descent.

    Parameters
    ----------
    X : (n, p) array
        Design matrix. Columns need not be standardized, only non-zero.
    y : (n,) array
        Response; center it yourself if an intercept is wanted.
    lam : float
        Non-negative penalty weight on sum |b_j|.
    beta_init : (p,) array, optional
        Warm start; zeros by default.
    max_sweeps : int
    tol : float
        Convergence when no coefficient moves more than this in a sweep.

    Returns
    -------
    (p,) coefficient array.
    """
    # column-major so the per-coordinate column reads are contiguous
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError("X must be (n, p) with y of length n")
    if lam < 0:
        raise DataError(f"penalty must be non-negative, got {lam}")
    col_sq = (X**2).sum(axis=0)
    if np.any(col_sq == 0.0):
        raise DataError("coordinate descent requires non-zero columns")
    beta = (
        np.zeros(X.shape[1])
        if beta_init is None
        else np.array(beta_init, dtype=np.float64, copy=True)
    )
    sweeps = _cd_sweeps_kernel(X, col_sq, y, float(lam), beta, int(max_sweeps), float(tol))
    if sweeps < 0:
        raise NumericalError(
            f"coordinate descent did not converge in {max_sweeps} sweeps"
        )
    return beta


def lasso_objective(X, y, beta, lam):
    """RSS plus lam times the L1 norm; the quantity both solvers minimize."""
    r = y - X @ beta
    return float(r @ r + lam * np.abs(beta).sum())


def kkt_residuals(X, y, beta, lam, zero_tol=0.0):
    """Stationarity violations at (beta, lam).

    For the objective above, optimality means |x_j.r| = lam/2 with matching
    sign where b_j is non-zero, and |x_j.r| <= lam/2 where b_j is zero.

    Returns
    -------
    (active_violation, inactive_violation) as max absolute excesses; both
    are 0 for an exact solution.
    """
    r = y - X @ beta
    corr = X.T @ r
    half = 0.5 * lam
    active = np.abs(beta) > zero_tol
    act_viol = 0.0
    if active.any():
        mag = np.abs(np.abs(corr[active]) - half)
        sign_bad = np.sign(corr[active]) != np.sign(beta[active])
        act_viol = float(mag.max())
        if sign_bad.any():
            # a sign mismatch is as bad as the full correlation magnitude
            act_viol = max(act_viol, float(np.abs(corr[active][sign_bad]).max()))
    inact_viol = 0.0
    if (~active).any():
        inact_viol = float(max(0.0, (np.abs(corr[~active]) - half).max()))
    return act_viol, inact_viol
