"""Regression with a reject option driven by an estimated variance.

A predictor abstains at ``x`` when the (randomized) variance estimate at
``x`` falls in the upper ``epsilon`` tail of its distribution, as measured
by an empirical CDF calibrated on unlabeled features.  The tiny uniform
perturbation ``zeta ~ U[0, u]`` added to every variance value breaks ties,
which matters for piecewise-constant estimators such as trees: without it
the rejection rate could not be tuned below the size of a tied block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._errors import InputError
from .rng import as_generator
from .simdata import Dataset, eval_f_star, eval_sigma2_star, get_model

DEFAULT_U = 1e-9
# slack for comparing k/N against 1 - eps (e.g. 1 - 0.9 < 0.1 in binary)
_CMP_SLACK = 1e-12


def _values(fn, x):
    if hasattr(fn, "predict_variance"):
        return np.asarray(fn.predict_variance(x), dtype=float)
    if hasattr(fn, "predict"):
        return np.asarray(fn.predict(x), dtype=float)
    return np.asarray(fn(x), dtype=float)


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step function ``v -> #{values <= v} / size``."""

    sorted_values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.sorted_values, dtype=float).ravel())
        if v.size == 0:
            raise InputError("empty calibration sample")
        object.__setattr__(self, "sorted_values", v)

    @property
    def size(self):
        return self.sorted_values.size

    def evaluate(self, v):
        """Binary search; accepts a scalar or an array."""
        counts = np.searchsorted(self.sorted_values, v, side="right")
        out = counts / self.size
        return float(out) if np.ndim(out) == 0 else out

    __call__ = evaluate


def calibrate_cdf(sigma2_hat, x_calib, u=DEFAULT_U, rng=None) -> EmpiricalCdf:
    """ECDF of ``sigma2_hat(X_i) + zeta_i`` over the calibration features."""
    if u <= 0:
        raise InputError(f"randomization width must be positive, got {u}")
    x = x_calib.x if isinstance(x_calib, Dataset) else np.asarray(x_calib, dtype=float)
    vals = _values(sigma2_hat, x)
    zeta = as_generator(rng).uniform(0.0, u, vals.shape[0])
    return EmpiricalCdf(vals + zeta)


@dataclass(frozen=True)
class RejectOutcome:
    accepted: bool
    value: float | None = None

    @property
    def rejected(self):
        return not self.accepted


@dataclass(eq=False)
class RejectPredictor:
    """Plug-in epsilon-predictor.

    ``f_hat`` and ``sigma2_hat`` are callables on a feature matrix or
    fitted objects exposing ``predict`` / ``predict_variance``.  Each
    decision draws its own ``zeta`` from ``rng``.
    """

    f_hat: object
    sigma2_hat: object
    cdf: EmpiricalCdf
    u: float = DEFAULT_U
    rng: np.random.Generator = field(default_factory=lambda: as_generator(None))

    def __post_init__(self):
        if self.u <= 0:
            raise InputError("u must be positive")
        self.rng = as_generator(self.rng)

    def accept_mask(self, x, epsilon) -> np.ndarray:
        """Vectorized decisions for the rows of ``x``: True means predict."""
        _check_eps(epsilon)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = _values(self.sigma2_hat, x) + self.rng.uniform(0.0, self.u, x.shape[0])
        return self.cdf.evaluate(s) <= 1.0 - epsilon + _CMP_SLACK

    def predict_mean(self, x):
        return _values(self.f_hat, np.atleast_2d(np.asarray(x, dtype=float)))


def _check_eps(epsilon):
    if not 0.0 <= epsilon < 1.0:
        raise InputError(f"epsilon must lie in [0, 1), got {epsilon}")


def decide(p: RejectPredictor, x, epsilon) -> RejectOutcome:
    """Predict ``f_hat(x)`` or abstain at a single point ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if p.accept_mask(x, epsilon)[0]:
        return RejectOutcome(True, float(p.predict_mean(x)[0]))
    return RejectOutcome(False)


def oracle_predictor(spec, x_calib, u=DEFAULT_U, rng=None) -> RejectPredictor:
    """The epsilon-predictor built from the true mean and variance.

    Its CDF is the empirical one of the true variance over ``x_calib``.
    """
    spec = get_model(spec)
    rng = as_generator(rng)

    def f(x):
        return eval_f_star(spec, x)

    def s2(x):
        return eval_sigma2_star(spec, x)

    return RejectPredictor(f, s2, calibrate_cdf(s2, x_calib, u, rng), u, rng)


@dataclass(frozen=True)
class RejectEvaluation:
    err: float
    rate: float
    degenerate: bool = False  # every test point was rejected; err is 0 by convention


def evaluate_reject(rule: RejectPredictor, dT: Dataset, epsilon) -> RejectEvaluation:
    """Rejection rate and mean squared error over the accepted test points."""
    if dT.n == 0:
        raise InputError("empty test sample")
    accept = rule.accept_mask(dT.x, epsilon)
    rate = float(np.mean(~accept))
    if not np.any(accept):
        return RejectEvaluation(0.0, 1.0, True)
    resid = dT.y[accept] - rule.predict_mean(dT.x[accept])
    return RejectEvaluation(float(np.mean(resid ** 2)), float(rate))
