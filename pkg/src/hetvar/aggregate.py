"""Model-selection and convex aggregation of candidate predictors.

Both procedures work on a :class:`CandidateSet`: the candidates'
predictions on a held-out aggregation sample (one column per candidate)
and the targets they are scored against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._errors import InputError, NumericalError


@dataclass(frozen=True, eq=False)
class CandidateSet:
    preds: np.ndarray  # (N, M)
    targets: np.ndarray  # (N,)

    def __post_init__(self):
        preds = np.asarray(self.preds, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if preds.ndim == 1:
            preds = preds[:, None]
        if preds.ndim != 2 or targets.ndim != 1 or preds.shape[0] != targets.shape[0]:
            raise InputError(f"incompatible shapes {preds.shape} and {targets.shape}")
        if preds.shape[0] < 1 or preds.shape[1] < 1:
            raise InputError("need at least one row and one candidate")
        if not (np.all(np.isfinite(preds)) and np.all(np.isfinite(targets))):
            raise InputError("candidate predictions and targets must be finite")
        object.__setattr__(self, "preds", preds)
        object.__setattr__(self, "targets", targets)

    @property
    def n_candidates(self):
        return self.preds.shape[1]

    def risks(self):
        """Empirical risk of every candidate column."""
        return np.mean((self.preds - self.targets[:, None]) ** 2, axis=0)

    def objective(self, w):
        r = self.targets - self.preds @ np.asarray(w, dtype=float)
        return float(r @ r / r.shape[0])


def empirical_risk(preds_col, targets) -> float:
    """Mean squared deviation between predictions and targets."""
    p = np.asarray(preds_col, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise InputError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def ms_select(cands: CandidateSet) -> int:
    """Index of the candidate with smallest empirical risk (first on ties)."""
    return int(np.argmin(cands.risks()))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold: find the largest ``rho`` with
    ``u_rho > (sum_{i<=rho} u_i - 1) / rho`` on the sorted vector ``u``
    and shift everything by that threshold.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise InputError("project_simplex needs a finite non-empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def gradient_step_bound(preds) -> float:
    """Row-sum (Gershgorin) bound on the Hessian ``(2/N) P'P``."""
    h = 2.0 / preds.shape[0] * (preds.T @ preds)
    return float(np.max(np.abs(h).sum(axis=1)))


def _pgd(hess, lin, const, w, lip, max_iter, tol, patience, history):
    def obj(w):
        return 0.5 * w @ hess @ w - lin @ w + const

    f = obj(w)
    if history is not None:
        history.append(f)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        w_new = project_simplex(w - (hess @ w - lin) / lip)
        f_new = obj(w_new)
        if not np.isfinite(f_new):
            raise NumericalError("convex aggregation objective is not finite", last_iterate=w)
        decrease = f - f_new
        w, f = w_new, f_new
        if history is not None:
            history.append(f)
        stall = stall + 1 if decrease < tol else 0
        if stall >= patience:
            break
    return w, f, it


def convex_weights(cands: CandidateSet, *, max_iter=100_000, tol=1e-10, patience=3,
                   history=None) -> np.ndarray:
    """Simplex weights minimising ``(1/N) ||targets - preds @ w||^2``.

    Projected gradient descent from the uniform vector with step ``1/L``,
    ``L`` the row-sum bound on the Hessian.  Stops once the objective
    decreases by less than ``tol`` on ``patience`` consecutive iterations.
    If the result is beaten by a single candidate (possible only when the
    descent stalls on a flat valley), descent resumes from that vertex, so
    the returned objective never exceeds the best single-candidate risk.

    Pass a list as ``history`` to collect the objective after every step.
    """
    p, t = cands.preds, cands.targets
    n, m = p.shape
    if m == 1:
        return np.ones(1)
    hess = 2.0 / n * (p.T @ p)
    lin = 2.0 / n * (p.T @ t)
    const = float(t @ t / n)
    lip = float(np.max(np.abs(hess).sum(axis=1)))
    if not np.isfinite(lip):
        raise NumericalError("non-finite Hessian bound")
    if lip == 0.0:
        return np.full(m, 1.0 / m)

    w, f, used = _pgd(hess, lin, const, np.full(m, 1.0 / m), lip, max_iter, tol, patience,
                      history)
    risks = cands.risks()
    j = int(np.argmin(risks))
    if risks[j] < f - 1e-12 and used < max_iter:
        start = np.zeros(m)
        start[j] = 1.0
        if history is not None:
            history.append(float(risks[j]))
        w, f, _ = _pgd(hess, lin, const, start, lip, max_iter - used, tol, patience, history)
    return w


def kkt_residual(cands: CandidateSet, w, active_tol=1e-8) -> float:
    """Largest violation of the simplex-constrained optimality conditions.

    Active coordinates must share one partial derivative ``mu``; inactive
    ones must have partials at least ``mu``.
    """
    w = np.asarray(w, dtype=float)
    n = cands.preds.shape[0]
    grad = -2.0 / n * cands.preds.T @ (cands.targets - cands.preds @ w)
    active = w > active_tol
    if not np.any(active):
        return float("inf")
    mu = grad[active].mean()
    spread = float(np.max(np.abs(grad[active] - mu)))
    below = float(np.max(np.maximum(mu - grad[~active], 0.0))) if np.any(~active) else 0.0
    return max(spread, below)


def predict_ms(regressors, idx, x) -> np.ndarray:
    if not 0 <= idx < len(regressors):
        raise InputError(f"index {idx} out of range for {len(regressors)} machines")
    return regressors[idx].predict(x)


def predict_convex(regressors, w, x) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (len(regressors),):
        raise InputError(f"{w.size} weights for {len(regressors)} machines")
    out = None
    for wj, reg in zip(w, regressors):
        if wj == 0.0:
            continue
        term = wj * reg.predict(x)
        out = term if out is None else out + term
    if out is None:
        return np.zeros(np.atleast_2d(x).shape[0])
    return out


def weights_to_json(w) -> str:
    return json.dumps([float(v) for v in w])


def weights_from_json(text) -> np.ndarray:
    w = np.array(json.loads(text), dtype=float)
    if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InputError("not a simplex weight vector")
    return w
