"""Synthetic heteroscedastic regression models and dataset utilities.

Six model settings are provided.  All designs are uniform on the unit cube.

=========  ===  =====================  ====================================
id         d    noise                  notes
=========  ===  =====================  ====================================
m1a025     3    standard normal        model 1, variance scale a = 1/4
m1a1       3    standard normal        model 1, variance scale a = 1
m2         10   standard normal
m3         50   standard normal        sparse linear mean, 14 active coords
m4         2    uniform[-sqrt3,sqrt3]  bounded response
m5         3    uniform[-sqrt3,sqrt3]  bounded response
=========  ===  =====================  ====================================

Responses follow ``Y = f(X) + sigma(X) * noise`` with unit-variance noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._errors import InputError
from .rng import as_generator

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n, d) and response vector ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or y.ndim != 1:
            raise InputError(f"x must be 2-d and y 1-d, got {x.shape} and {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise InputError(f"row count {x.shape[0]} != response length {y.shape[0]}")
        if x.shape[1] < 1:
            raise InputError("need at least one feature")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def __len__(self):
        return self.n

    def take(self, rows) -> Dataset:
        return Dataset(self.x[rows], self.y[rows])

    def concat(self, other: Dataset) -> Dataset:
        if other.d != self.d:
            raise InputError(f"dimension mismatch: {self.d} vs {other.d}")
        return Dataset(np.vstack([self.x, other.x]), np.concatenate([self.y, other.y]))

    def to_csv(self, path):
        """Write ``x1,...,xd,y`` with round-trip float formatting."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j + 1}" for j in range(self.d)] + ["y"])
            for row, yi in zip(self.x, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])

    @classmethod
    def from_csv(cls, path) -> Dataset:
        with Path(path).open(newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if not header or header[-1] != "y":
                raise InputError(f"{path}: last column must be 'y', got header {header}")
            rows = [[float(v) for v in row] for row in r if row]
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        return cls(arr[:, :-1], arr[:, -1])


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    dim: int
    noise_kind: str  # "gaussian" or "uniform_sqrt3"
    sparsity: int | None = None
    scale_a: float | None = None

    def __post_init__(self):
        if self.noise_kind not in ("gaussian", "uniform_sqrt3"):
            raise InputError(f"unknown noise kind {self.noise_kind!r}")
        if self.sparsity is not None and self.sparsity > self.dim:
            raise InputError("sparsity exceeds dimension")


MODELS = {
    "m1a025": ModelSpec("m1a025", 3, "gaussian", scale_a=0.25),
    "m1a1": ModelSpec("m1a1", 3, "gaussian", scale_a=1.0),
    "m2": ModelSpec("m2", 10, "gaussian"),
    "m3": ModelSpec("m3", 50, "gaussian", sparsity=14),
    "m4": ModelSpec("m4", 2, "uniform_sqrt3"),
    "m5": ModelSpec("m5", 3, "uniform_sqrt3"),
}


def get_model(model_id) -> ModelSpec:
    """Look up a model by id (case-insensitive)."""
    if isinstance(model_id, ModelSpec):
        return model_id
    key = str(model_id).lower()
    if key not in MODELS:
        raise InputError(f"unknown model {model_id!r}; valid: {', '.join(MODELS)}")
    return MODELS[key]


def _as_rows(spec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != spec.dim:
        raise InputError(f"{spec.model_id} expects {spec.dim} features, got shape {x.shape}")
    return x2, single


def _oscillating(x):
    # sqrt(X1(1-X1)) sin(2.1 pi / (X2 + 0.05)), shared by models 3 and 5
    return np.sqrt(x[:, 0] * (1 - x[:, 0])) * np.sin(2.1 * np.pi / (x[:, 1] + 0.05))


def eval_f_star(spec, x):
    """True regression function at one point (1-d) or at each row (2-d)."""
    spec = get_model(spec)
    x, single = _as_rows(spec, x)
    mid = spec.model_id
    if mid in ("m1a025", "m1a1"):
        out = 0.1 * np.cos(x[:, 0]) + np.exp(-x[:, 2] ** 2)
    elif mid == "m2":
        out = (0.1 + np.exp(-x[:, 0] ** 2)
               + 0.2 * np.sin(x[:, 1] + x[:, 2] + x[:, 3] + 0.1 * x[:, 4] ** 2))
    elif mid == "m3":
        beta = (np.arange(spec.dim) < spec.sparsity).astype(float)
        out = x @ beta
    elif mid == "m4":
        out = x[:, 0] + np.exp(-x[:, 1] ** 2)
    else:
        out = x[:, 0] + x[:, 1] + 0.5 * np.cos(x[:, 2])
    return float(out[0]) if single else out


def eval_sigma2_star(spec, x):
    """True conditional variance at one point (1-d) or at each row (2-d)."""
    spec = get_model(spec)
    x, single = _as_rows(spec, x)
    mid = spec.model_id
    if mid in ("m1a025", "m1a1"):
        # a sum of three separate Gaussian bumps, none nested in another
        out = spec.scale_a * (0.1
                              + np.exp(-7 * (x[:, 0] - 0.2) ** 2)
                              + np.exp(-10 * (x[:, 1] - 0.5) ** 2)
                              + np.exp(-50 * (x[:, 2] - 0.9) ** 2))
    elif mid == "m2":
        inner = (0.5 + np.sqrt(x[:, 0] * (1 - x[:, 1])) + 0.8 * x[:, 2] * x[:, 3]
                 + x[:, 4] * x[:, 5] * x[:, 6] ** 2
                 + 0.9 * np.exp(-500 * (x[:, 7] + x[:, 8] + x[:, 9] - 0.5) ** 2))
        out = 0.5 * inner ** 2
    elif mid == "m3":
        out = 0.5 * (0.3 + _oscillating(x) + 0.5 * x[:, 2] + x[:, 3]) ** 2
    elif mid == "m4":
        out = 0.01 + x[:, 0] * np.exp(-(x[:, 1] - 0.9) ** 2)
    else:
        out = (0.3 + _oscillating(x) + x[:, 2]) ** 2
    return float(out[0]) if single else out


def draw_noise(kind, n, rng):
    """Unit-variance noise: standard normal or uniform on [-sqrt3, sqrt3]."""
    rng = as_generator(rng)
    if kind == "gaussian":
        return rng.standard_normal(n)
    if kind == "uniform_sqrt3":
        return rng.uniform(-SQRT3, SQRT3, n)
    raise InputError(f"unknown noise kind {kind!r}")


def draw_features(spec, n, rng):
    spec = get_model(spec)
    if n < 1:
        raise InputError("n must be >= 1")
    return as_generator(rng).random((n, spec.dim))


def generate(spec, n, rng, *, zero_noise=False) -> Dataset:
    """Draw ``n`` i.i.d. observations from ``spec``.

    ``zero_noise=True`` is a diagnostic hook that returns ``y = f(x)``.
    """
    spec = get_model(spec)
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n!r}")
    rng = as_generator(rng)
    x = draw_features(spec, int(n), rng)
    noise = draw_noise(spec.noise_kind, int(n), rng)
    y = eval_f_star(spec, x)
    if not zero_noise:
        y = y + np.sqrt(eval_sigma2_star(spec, x)) * noise
    return Dataset(x, y)


def split(data: Dataset, sizes, rng) -> list[Dataset]:
    """Randomly partition rows of ``data`` into disjoint pieces of ``sizes``."""
    sizes = [int(s) for s in sizes]
    if any(s < 0 for s in sizes):
        raise InputError("sizes must be nonnegative")
    if sum(sizes) > data.n:
        raise InputError(f"sizes sum to {sum(sizes)} > {data.n} rows")
    perm = as_generator(rng).permutation(data.n)
    bounds = np.cumsum([0] + sizes)
    return [data.take(perm[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
