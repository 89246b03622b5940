"""Base learners and the 12-machine dictionary.

Every fitted learner exposes ``predict(x) -> ndarray`` on a 2-d feature
matrix and is immutable once fitted.

>>> import numpy as np
>>> from hetvar.simdata import Dataset
>>> data = Dataset(np.arange(5.0)[:, None], np.arange(5.0))
>>> float(fit_knn(data, 2).predict(np.array([[1.6]]))[0])
1.5
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .._errors import InputError, NumericalError
from ..rng import as_generator, child_seed
from ..simdata import Dataset
from . import _cart
from ._linear import elastic_net_cd, ridge_solution, standardize

__all__ = [
    "Regressor", "KNNRegressor", "LinearRegressor", "TreeRegressor", "ForestRegressor",
    "TreeParams", "DictionaryConfig", "ConstantRegressor",
    "fit_knn", "fit_ridge", "fit_lasso", "fit_enet", "fit_tree", "fit_forest",
    "build_dictionary", "machine_names",
]

_BIG_DEPTH = 1_000_000


def _features(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        # a single point, or a column of points when d == 1
        x = x[:, None] if d == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise InputError(f"expected {d} features, got array of shape {np.shape(x)}")
    return x


class Regressor:
    """Common interface: ``kind``, ``d`` and ``predict``."""

    kind = "base"
    d: int

    def predict(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.predict(x)


@dataclass(frozen=True)
class ConstantRegressor(Regressor):
    """Predicts a fixed value; used as a test stub and degenerate fallback."""

    value: float
    d: int
    kind: str = "constant"

    def predict(self, x):
        x = _features(x, self.d)
        return np.full(x.shape[0], float(self.value))


# -- k nearest neighbours ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class KNNRegressor(Regressor):
    x: np.ndarray
    y: np.ndarray
    k: int
    kind: str = "knn"

    @property
    def d(self):
        return self.x.shape[1]

    def predict(self, x, chunk=512):
        x = _features(x, self.d)
        k = self.k
        out = np.empty(x.shape[0])
        for a in range(0, x.shape[0], chunk):
            dist = cdist(x[a:a + chunk], self.x, "sqeuclidean")
            kth = np.partition(dist, k - 1, axis=1)[:, k - 1:k]
            closer = dist < kth
            tied = dist == kth
            # fill the remaining slots with tied rows in index order
            room = k - closer.sum(axis=1, keepdims=True)
            take = closer | (tied & (np.cumsum(tied, axis=1) <= room))
            out[a:a + chunk] = take @ self.y / k
        return out


def fit_knn(data: Dataset, k: int) -> KNNRegressor:
    if int(k) != k or not 1 <= k <= data.n:
        raise InputError(f"k must be an integer in [1, n={data.n}], got {k}")
    return KNNRegressor(data.x.copy(), data.y.copy(), int(k))


# -- penalized linear models -------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearRegressor(Regressor):
    """Coefficients on the original feature scale plus intercept.

    ``coef_std`` keeps the standardized-scale solution for diagnostics.
    """

    coef: np.ndarray
    intercept: float
    coef_std: np.ndarray
    lam: float
    alpha: float
    kind: str = "ridge"

    @property
    def d(self):
        return self.coef.shape[0]

    def predict(self, x):
        x = _features(x, self.d)
        return x @ self.coef + self.intercept


def _linear_from_std(beta, x_mean, x_scale, y_mean, lam, alpha, kind):
    coef = beta / x_scale
    return LinearRegressor(coef, float(y_mean - x_mean @ coef), beta, float(lam),
                           float(alpha), kind)


def fit_ridge(data: Dataset, lam: float) -> LinearRegressor:
    """Closed-form ridge with unpenalized intercept on standardized features."""
    xs, yc, xm, xsc, ym = standardize(data.x, data.y)
    beta = ridge_solution(xs, yc, lam)
    return _linear_from_std(beta, xm, xsc, ym, lam, 0.0, "ridge")


def fit_enet(data: Dataset, lam: float, alpha: float, *, max_sweeps=10_000,
             tol=1e-7, kind="enet") -> LinearRegressor:
    """Elastic net by cyclic coordinate descent with soft-thresholding.

    Raises :class:`NumericalError` carrying the last iterate (standardized
    scale) if the coefficients still move by ``tol`` after ``max_sweeps``.
    """
    xs, yc, xm, xsc, ym = standardize(data.x, data.y)
    beta = elastic_net_cd(xs, yc, lam, alpha, max_sweeps=max_sweeps, tol=tol)
    return _linear_from_std(beta, xm, xsc, ym, lam, alpha, kind)


def fit_lasso(data: Dataset, lam: float, **kw) -> LinearRegressor:
    return fit_enet(data, lam, 1.0, kind="lasso", **kw)


# -- trees and forests ------------------------------------------------------

@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 30
    min_leaf: int = 5
    min_split: int = 10

    def __post_init__(self):
        if self.min_leaf < 1:
            raise InputError("min_leaf must be >= 1")
        if self.min_split < 2 * self.min_leaf:
            raise InputError("min_split must be >= 2 * min_leaf")
        if self.max_depth < 0:
            raise InputError("max_depth must be >= 0")


FOREST_PARAMS = TreeParams(max_depth=_BIG_DEPTH, min_leaf=5, min_split=10)


@dataclass(frozen=True, eq=False)
class _PackedTrees:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray

    @property
    def ntree(self):
        return self.offsets.shape[0] - 1

    def per_tree(self, x):
        return _cart.predict_trees(x, self.feature, self.threshold, self.left,
                                   self.right, self.value, self.offsets)

    def tree(self, t):
        a, b = self.offsets[t], self.offsets[t + 1]
        return _PackedTrees(self.feature[a:b], self.threshold[a:b], self.left[a:b],
                            self.right[a:b], self.value[a:b], np.array([0, b - a]))


def _grow(data, ntree, mtry, params, bootstrap, seed):
    out = _cart.grow_forest(data.x, data.y, int(ntree), int(mtry), int(params.min_leaf),
                            int(params.min_split), int(params.max_depth), bool(bootstrap),
                            np.uint64(seed))
    return _PackedTrees(*out)


@dataclass(frozen=True, eq=False)
class TreeRegressor(Regressor):
    packed: _PackedTrees
    d: int
    kind: str = "tree"

    @property
    def n_nodes(self):
        return int(self.packed.offsets[-1])

    @property
    def n_leaves(self):
        return int(np.sum(self.packed.feature < 0))

    @property
    def root_split(self):
        """(feature, threshold) of the root, or None for a single leaf."""
        f = int(self.packed.feature[0])
        return None if f < 0 else (f, float(self.packed.threshold[0]))

    def predict(self, x):
        x = _features(x, self.d)
        return self.packed.per_tree(x)[0]


def fit_tree(data: Dataset, params: TreeParams | None = None) -> TreeRegressor:
    """Greedy CART on all features, no resampling."""
    params = params or TreeParams()
    return TreeRegressor(_grow(data, 1, data.d, params, False, 0), data.d)


@dataclass(frozen=True, eq=False)
class ForestRegressor(Regressor):
    packed: _PackedTrees
    d: int
    mtry: int
    kind: str = "forest"

    @property
    def ntree(self):
        return self.packed.ntree

    @property
    def trees(self):
        return [TreeRegressor(self.packed.tree(t), self.d) for t in range(self.ntree)]

    def predict_trees(self, x):
        return self.packed.per_tree(_features(x, self.d))

    def predict(self, x):
        return np.mean(self.predict_trees(x), axis=0)


def fit_forest(data: Dataset, ntree: int, rng=None, *, mtry=None, bootstrap=True,
               params: TreeParams | None = None) -> ForestRegressor:
    """Bagged CART ensemble with random feature subsets at each split.

    Defaults follow the usual regression-forest settings: ``mtry =
    max(1, d // 3)``, leaves of at least 5 rows, unlimited depth.
    """
    if int(ntree) != ntree or ntree < 1:
        raise InputError(f"ntree must be a positive integer, got {ntree}")
    mtry = max(1, data.d // 3) if mtry is None else int(mtry)
    if not 1 <= mtry <= data.d:
        raise InputError(f"mtry must lie in [1, {data.d}], got {mtry}")
    seed = child_seed(as_generator(rng))
    packed = _grow(data, ntree, mtry, params or FOREST_PARAMS, bootstrap, seed)
    return ForestRegressor(packed, data.d, mtry)


# -- the dictionary -----------------------------------------------------------

@dataclass(frozen=True)
class DictionaryConfig:
    forest_ntrees: tuple = (50, 150, 500)
    knn_ks: tuple = (7, 13, 22)
    lasso_lambdas: tuple = (0.5, 2.0)
    ridge_lambdas: tuple = (0.9, 3.0)
    enet: tuple = (1.0, 0.6)  # (lambda, alpha)
    tree: TreeParams = field(default_factory=TreeParams)

    @property
    def size(self):
        return (len(self.forest_ntrees) + len(self.knn_ks) + len(self.lasso_lambdas)
                + len(self.ridge_lambdas) + 2)


def machine_names(config: DictionaryConfig | None = None) -> list[str]:
    """Labels in dictionary order: forests, kNN, lasso, ridge, tree, enet."""
    c = config or DictionaryConfig()
    return ([f"forest_{t}" for t in c.forest_ntrees] + [f"knn_{k}" for k in c.knn_ks]
            + [f"lasso_{g:g}" for g in c.lasso_lambdas] + [f"ridge_{g:g}" for g in c.ridge_lambdas]
            + ["tree", f"enet_{c.enet[0]:g}_{c.enet[1]:g}"])


def _plan(config):
    c = config
    plan = [lambda d, r, t=t: fit_forest(d, t, r) for t in c.forest_ntrees]
    plan += [lambda d, r, k=k: fit_knn(d, k) for k in c.knn_ks]
    plan += [lambda d, r, g=g: fit_lasso(d, g) for g in c.lasso_lambdas]
    plan += [lambda d, r, g=g: fit_ridge(d, g) for g in c.ridge_lambdas]
    plan += [lambda d, r: fit_tree(d, c.tree),
             lambda d, r: fit_enet(d, c.enet[0], c.enet[1])]
    return plan


def build_dictionary(data: Dataset, config: DictionaryConfig | None = None,
                     rng=None) -> list[Regressor]:
    """Fit every machine of ``config`` on ``data``, in the documented order.

    Each machine receives its own generator seeded from ``rng`` up front,
    so a machine's fit does not depend on what the others consumed.
    """
    config = config or DictionaryConfig()
    largest_k = max(config.knn_ks) if config.knn_ks else 1
    if data.n < largest_k:
        raise InputError(f"need at least {largest_k} rows for the dictionary, got {data.n}")
    rng = as_generator(rng)
    seeds = rng.integers(0, 2**63 - 1, size=config.size, dtype=np.int64)
    names = machine_names(config)
    machines = []
    for j, fit in enumerate(_plan(config)):
        try:
            machines.append(fit(data, np.random.Generator(np.random.Philox(int(seeds[j])))))
        except NumericalError as exc:
            raise NumericalError(f"machine {j} ({names[j]}): {exc}", exc.last_iterate) from exc
        except InputError as exc:
            raise InputError(f"machine {j} ({names[j]}): {exc}") from exc
    return machines
