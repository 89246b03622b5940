"""Residual-based conditional variance estimation by aggregation.

The pipeline uses two independent samples, ``dn`` and ``dN``:

1. fit the regression dictionary on ``dn``;
2. aggregate it on ``dN`` against the responses (pick one machine in
   ``"MS"`` mode, fit simplex weights in ``"C"`` mode);
3. square the residuals of that aggregate on ``dn``;
4. fit the variance dictionary on ``dn`` against those squared residuals;
5. aggregate the variance dictionary on ``dN`` against the squared
   residuals of the same regression aggregate on ``dN``.

Variance candidates are clipped at zero before they are scored or mixed,
so every aggregate is nonnegative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._errors import InputError, NumericalError
from .aggregate import CandidateSet, convex_weights, ms_select
from .regressors import DictionaryConfig, build_dictionary, machine_names
from .rng import as_generator
from .simdata import Dataset, eval_sigma2_star, get_model

MODES = ("MS", "C")


def candidate_matrix(machines, x) -> np.ndarray:
    """Predictions of every machine at the rows of ``x``, one column each."""
    return np.column_stack([m.predict(x) for m in machines])


def clipped_candidates(machines, x) -> np.ndarray:
    return np.maximum(candidate_matrix(machines, x), 0.0)


def _combine(mode, selector, cols):
    if mode == "MS":
        return cols[:, selector]
    # skip exact zeros so a vertex reproduces its column bit for bit
    out = np.zeros(cols.shape[0])
    for j in np.flatnonzero(selector):
        out = out + selector[j] * cols[:, j]
    return out


@dataclass(frozen=True, eq=False)
class VariancePipeline:
    mode: str
    f_dictionary: list
    f_selector: object  # int in MS mode, weight vector in C mode
    var_dictionary: list
    var_selector: object
    f_risks: np.ndarray  # per-machine risk on dN against y
    var_risks: np.ndarray  # per-candidate risk on dN against squared residuals
    agg_risk: float  # risk of the variance aggregate on dN
    config: DictionaryConfig = DictionaryConfig()

    @property
    def d(self):
        return self.f_dictionary[0].d

    def _rows(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :] if self.d > 1 else x[:, None]
        if x.ndim != 2 or x.shape[1] != self.d:
            raise InputError(f"expected {self.d} features, got shape {np.shape(x)}")
        return x

    def predict_mean(self, x) -> np.ndarray:
        """The stage-one regression aggregate."""
        x = self._rows(x)
        if self.mode == "MS":
            return self.f_dictionary[self.f_selector].predict(x)
        return _combine("C", self.f_selector, candidate_matrix(self.f_dictionary, x))

    def variance_candidates(self, x) -> np.ndarray:
        return clipped_candidates(self.var_dictionary, self._rows(x))

    def predict_variance(self, x) -> np.ndarray:
        x = self._rows(x)
        if self.mode == "MS":
            return np.maximum(self.var_dictionary[self.var_selector].predict(x), 0.0)
        return _combine("C", self.var_selector, self.variance_candidates(x))

    def summary(self) -> dict:
        def sel(s):
            return int(s) if self.mode == "MS" else [float(v) for v in s]

        return {
            "mode": self.mode,
            "machines": machine_names(self.config),
            "f_selector": sel(self.f_selector),
            "var_selector": sel(self.var_selector),
            "f_risks": [float(v) for v in self.f_risks],
            "var_risks": [float(v) for v in self.var_risks],
            "agg_risk": float(self.agg_risk),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary())


def _select(mode, cands):
    if mode == "MS":
        return ms_select(cands)
    return convex_weights(cands)


def _stage(label, fn, *args):
    try:
        return fn(*args)
    except NumericalError as exc:
        raise NumericalError(f"{label}: {exc}", exc.last_iterate) from exc
    except InputError as exc:
        raise InputError(f"{label}: {exc}") from exc


def _check(dn, dN):
    if dn.d != dN.d:
        raise InputError(f"dn has {dn.d} features but dN has {dN.d}")


def _stage_rngs(rng):
    rng = as_generator(rng)
    seeds = rng.integers(0, 2**63 - 1, size=3, dtype=np.int64)
    return [np.random.Generator(np.random.Philox(int(s))) for s in seeds]


def _fit_from_dictionary(mode, dn, dN, config, var_rng, f_dictionary, f_cols_n, f_cols_N):
    f_cands = CandidateSet(f_cols_N, dN.y)
    f_sel = _stage("regression aggregation", _select, mode, f_cands)

    z_n = (dn.y - _combine(mode, f_sel, f_cols_n)) ** 2
    var_dictionary = _stage("variance dictionary", build_dictionary,
                            Dataset(dn.x, z_n), config, var_rng)

    z_N = (dN.y - _combine(mode, f_sel, f_cols_N)) ** 2
    var_cands = CandidateSet(clipped_candidates(var_dictionary, dN.x), z_N)
    var_sel = _stage("variance aggregation", _select, mode, var_cands)
    w = np.eye(var_cands.n_candidates)[var_sel] if mode == "MS" else var_sel

    return VariancePipeline(mode, f_dictionary, f_sel, var_dictionary, var_sel,
                            f_cands.risks(), var_cands.risks(), var_cands.objective(w), config)


def fit_variance(mode, dn: Dataset, dN: Dataset, config: DictionaryConfig | None = None,
                 rng=None, *, f_dictionary=None) -> VariancePipeline:
    """Fit the MS or C variance aggregate on the samples ``dn`` and ``dN``.

    ``f_dictionary`` lets callers pass an already fitted stage-one
    dictionary (it must have been fitted on ``dn``).
    """
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    _check(dn, dN)
    config = config or DictionaryConfig()
    f_rng, ms_rng, c_rng = _stage_rngs(rng)
    if f_dictionary is None:
        f_dictionary = _stage("regression dictionary", build_dictionary, dn, config, f_rng)
    return _fit_from_dictionary(mode, dn, dN, config, ms_rng if mode == "MS" else c_rng,
                                f_dictionary, candidate_matrix(f_dictionary, dn.x),
                                candidate_matrix(f_dictionary, dN.x))


def fit_variance_pair(dn: Dataset, dN: Dataset, config: DictionaryConfig | None = None,
                      rng=None) -> tuple[VariancePipeline, VariancePipeline]:
    """MS and C pipelines sharing one regression dictionary.

    Equivalent to calling :func:`fit_variance` twice with the same ``rng``
    state, but the dictionary is fitted and evaluated only once.
    """
    _check(dn, dN)
    config = config or DictionaryConfig()
    f_rng, ms_rng, c_rng = _stage_rngs(rng)
    f_dictionary = _stage("regression dictionary", build_dictionary, dn, config, f_rng)
    cols_n = candidate_matrix(f_dictionary, dn.x)
    cols_N = candidate_matrix(f_dictionary, dN.x)
    ms = _fit_from_dictionary("MS", dn, dN, config, ms_rng, f_dictionary, cols_n, cols_N)
    c = _fit_from_dictionary("C", dn, dN, config, c_rng, f_dictionary, cols_n, cols_N)
    return ms, c


def _variance_values(sigma2_hat, x):
    if hasattr(sigma2_hat, "predict_variance"):
        return sigma2_hat.predict_variance(x)
    if hasattr(sigma2_hat, "predict"):
        return sigma2_hat.predict(x)
    if callable(sigma2_hat):
        return np.asarray(sigma2_hat(x), dtype=float)
    return np.asarray(sigma2_hat, dtype=float)


def empirical_l2_error(sigma2_hat, spec, dT) -> float:
    """Mean squared gap between estimated and true variance over ``dT``.

    ``sigma2_hat`` may be a fitted pipeline, a regressor, a callable on the
    feature matrix, or an array of precomputed predictions at ``dT``.
    ``dT`` may be a :class:`Dataset` or a bare feature matrix.
    """
    x = dT.x if isinstance(dT, Dataset) else np.asarray(dT, dtype=float)
    if x.shape[0] == 0:
        raise InputError("empty test sample")
    est = _variance_values(sigma2_hat, x)
    truth = eval_sigma2_star(get_model(spec), x)
    return float(np.mean((est - truth) ** 2))


@dataclass(frozen=True)
class BestCandidate:
    f_index: int
    var_index: int
    error: float
    errors: np.ndarray  # (12, 12) test error of every (f, variance) pair


def best_candidate_oracle(d_all: Dataset, spec, dT: Dataset,
                          config: DictionaryConfig | None = None, rng=None) -> BestCandidate:
    """Best residual-based estimator in hindsight, scored against the truth.

    Every regression machine fitted on ``d_all`` is paired with every
    variance machine fitted on its squared residuals; the pair with the
    smallest test error on ``dT`` wins.  This is a benchmark, not an
    estimator: it peeks at the true variance.
    """
    config = config or DictionaryConfig()
    rng = as_generator(rng)
    spec = get_model(spec)
    f_dict = _stage("best: regression dictionary", build_dictionary, d_all, config, rng)
    truth = eval_sigma2_star(spec, dT.x)
    f_cols = candidate_matrix(f_dict, d_all.x)
    errors = np.empty((len(f_dict), config.size))
    for s in range(len(f_dict)):
        z = (d_all.y - f_cols[:, s]) ** 2
        g = _stage(f"best: variance dictionary {s}", build_dictionary,
                   Dataset(d_all.x, z), config, rng)
        preds = clipped_candidates(g, dT.x)
        errors[s] = np.mean((preds - truth[:, None]) ** 2, axis=0)
    s, m = np.unravel_index(int(np.argmin(errors)), errors.shape)
    return BestCandidate(int(s), int(m), float(errors[s, m]), errors)
