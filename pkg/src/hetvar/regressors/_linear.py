"""Penalized linear models on standardized features.

All three fits minimise

    (1/2n) ||y - b - X beta||^2 + lam * (alpha ||beta||_1 + (1 - alpha)/2 ||beta||^2)

with the columns of X centred and scaled to unit (population) variance and
an unpenalized intercept.  Ridge (alpha = 0) is solved in closed form,
lasso (alpha = 1) and elastic net by cyclic coordinate descent.
"""

import numpy as np
from numba import njit

from .._errors import InputError, NumericalError

MAX_SWEEPS = 10_000
TOL = 1e-7


def standardize(x, y):
    """Return (xs, yc, x_mean, x_scale, y_mean); constant columns get scale 1."""
    x_mean = x.mean(axis=0)
    x_scale = x.std(axis=0)
    const = x_scale == 0
    x_scale = np.where(const, 1.0, x_scale)
    xs = (x - x_mean) / x_scale
    xs[:, const] = 0.0
    y_mean = y.mean()
    return xs, y - y_mean, x_mean, x_scale, y_mean


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@njit(cache=True, nogil=True)
def _cd(gram, xty, l1, l2, beta, max_sweeps, tol):
    """Cyclic coordinate descent on the covariance form of the objective.

    ``gram = Xs'Xs/n`` and ``xty = Xs'yc/n``.  Returns (beta, sweeps, converged).
    """
    p = gram.shape[0]
    grad = xty - gram @ beta  # partial residual correlations
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            gjj = gram[j, j]
            if gjj == 0.0:
                continue
            z = grad[j] + gjj * beta[j]
            a = abs(z) - l1
            new = 0.0
            if a > 0.0:
                new = np.sign(z) * a / (gjj + l2)
            delta = new - beta[j]
            if delta != 0.0:
                for k in range(p):
                    grad[k] -= gram[k, j] * delta
                beta[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            return beta, sweep, True
    return beta, max_sweeps, False


def elastic_net_cd(xs, yc, lam, alpha, max_sweeps=MAX_SWEEPS, tol=TOL):
    """Coordinate-descent solution on already standardized data."""
    if lam < 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    n = xs.shape[0]
    gram = xs.T @ xs / n
    xty = xs.T @ yc / n
    beta = np.zeros(xs.shape[1])
    beta, sweeps, ok = _cd(gram, xty, lam * alpha, lam * (1 - alpha), beta,
                           int(max_sweeps), float(tol))
    if not ok:
        raise NumericalError(
            f"coordinate descent did not converge in {max_sweeps} sweeps", last_iterate=beta)
    if not np.all(np.isfinite(beta)):
        raise NumericalError("coordinate descent produced non-finite coefficients",
                             last_iterate=beta)
    return beta


def ridge_solution(xs, yc, lam):
    """Closed form: (Xs'Xs/n + lam I) beta = Xs'yc/n."""
    if lam < 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    n, p = xs.shape
    a = xs.T @ xs / n + lam * np.eye(p)
    b = xs.T @ yc / n
    if lam == 0 and np.linalg.cond(a) > 1e12:
        raise NumericalError("ridge system is singular at lambda = 0 (collinear features)")
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"ridge solve failed: {exc}") from exc
    return beta
