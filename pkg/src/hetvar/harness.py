"""Seeded Monte-Carlo experiments and their CSV summaries.

Every replication draws its randomness from streams keyed by
``(seed, model, replication, stage...)`` so results do not depend on how
replications are scheduled across worker threads.  Replications are
gathered back in index order before anything is aggregated or written.
"""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng as rngmod
from ._errors import InputError, NumericalError
from .regressors import DictionaryConfig, fit_forest, fit_knn, fit_tree
from .reject import calibrate_cdf, evaluate_reject, oracle_predictor, RejectPredictor
from .rng import stream
from .simdata import MODELS, Dataset, draw_features, generate, get_model
from .varpipe import best_candidate_oracle, empirical_l2_error, fit_variance_pair

log = logging.getLogger(__name__)

TABLE1_METHODS = ("C", "MS", "Best")
PLUGIN_METHODS = ("tree", "rf", "C", "MS", "knn")
ALL_METHODS = TABLE1_METHODS + ("oracle",) + tuple(f"plugin-{m}" for m in PLUGIN_METHODS)
DEFAULT_EPSILONS = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)
PLUGIN_KNN_K = 13
PLUGIN_RF_NTREE = 500

_MODEL_KEY = {mid: i for i, mid in enumerate(MODELS)}


@dataclass(frozen=True)
class ExperimentConfig:
    model_ids: tuple = ()
    n: int = 1000
    N: int = 1000
    calib_size: int = 100
    T: int = 1000
    reps: int = 20
    epsilons: tuple = DEFAULT_EPSILONS
    seed: int = 0
    methods: tuple | None = None  # None: every method the run supports (knn excluded)
    output_dir: str | None = None
    threads: int = 1

    def __post_init__(self):
        ids = tuple(get_model(m).model_id for m in self.model_ids)
        object.__setattr__(self, "model_ids", ids)
        for name in ("n", "N", "calib_size", "T", "reps", "threads"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InputError(f"{name} must be a positive integer, got {v!r}")
        eps = tuple(float(e) for e in self.epsilons)
        if any(not 0.0 <= e < 1.0 for e in eps):
            raise InputError(f"epsilons must lie in [0, 1), got {eps}")
        object.__setattr__(self, "epsilons", eps)
        if self.methods is not None:
            bad = [m for m in self.methods if m not in ALL_METHODS]
            if bad:
                raise InputError(f"unknown method(s) {bad}; valid: {', '.join(ALL_METHODS)}")
            object.__setattr__(self, "methods", tuple(self.methods))


@dataclass
class RunSummary:
    kind: str
    summary: list = field(default_factory=list)  # dicts, one per CSV row
    raw: list = field(default_factory=list)
    failures: int = 0
    failure_messages: list = field(default_factory=list)

    def lookup(self, model, method, epsilon=None, n=None, N=None):
        for row in self.summary:
            if row["model"] != model or row["method"] != method:
                continue
            if epsilon is not None and abs(row["epsilon"] - epsilon) > 1e-12:
                continue
            if n is not None and row.get("n") != n:
                continue
            if N is not None and row.get("N") != N:
                continue
            return row
        raise KeyError((model, method, epsilon, n, N))

    def raw_values(self, model, method, key="err", epsilon=None):
        out = []
        for row in self.raw:
            if row["model"] != model or row.get("status", "ok") != "ok":
                continue
            if "method" in row and row["method"] != method:
                continue
            if epsilon is not None and abs(row["epsilon"] - epsilon) > 1e-12:
                continue
            out.append(row[key] if "method" in row else row[method])
        return np.array(out, dtype=float)


def mean_std(values):
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])
    return path


def _map_reps(fn, cfg):
    reps = range(cfg.reps)
    if cfg.threads == 1:
        return [fn(r) for r in reps]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, reps))


def _guard(fn, label):
    """Turn a failing replication into a tallied, skipped result."""
    def run(rep):
        t0 = time.perf_counter()
        try:
            out = fn(rep)
        except (NumericalError, InputError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("%s rep %d failed: %s", label, rep, exc)
            return {"status": "failed", "message": f"{label} rep {rep}: {exc}"}
        log.info("%s rep %d done in %.1fs", label, rep, time.perf_counter() - t0)
        return out
    return run


# -- variance estimation (Tables 1-2) ------------------------------------------

CHECK_COLUMNS = ["min_var", "ms_argmin", "c_gap"]


def _pipeline_checks(ms, c, x):
    """Structural invariants of a fitted MS/C pair, recorded per replication.

    ``min_var`` is the smallest variance prediction of either pipeline at
    ``x``, ``ms_argmin`` whether both MS selectors are the exact argmin of
    their risks, ``c_gap`` the C aggregate's risk minus its best vertex.
    """
    pred_c, pred_ms = c.predict_variance(x), ms.predict_variance(x)
    argmin = (ms.f_selector == int(np.argmin(ms.f_risks))
              and ms.var_selector == int(np.argmin(ms.var_risks)))
    return {"min_var": float(min(pred_c.min(), pred_ms.min())), "ms_argmin": bool(argmin),
            "c_gap": float(c.agg_risk - c.var_risks.min()), "_c": pred_c, "_ms": pred_ms}


def _table1_rep(cfg, model, methods, rep):
    mk = _MODEL_KEY[model]
    data_rng = stream(cfg.seed, mk, rep, rngmod.DATA)
    dn = generate(model, cfg.n, data_rng)
    dN = generate(model, cfg.N, data_rng)
    dT = generate(model, cfg.T, data_rng)
    out = {"status": "ok"}
    if "C" in methods or "MS" in methods:
        ms, c = fit_variance_pair(dn, dN, DictionaryConfig(), stream(cfg.seed, mk, rep, rngmod.F_DICT))
        out.update(_pipeline_checks(ms, c, dT.x))
        out["C"] = empirical_l2_error(out.pop("_c"), model, dT)
        out["MS"] = empirical_l2_error(out.pop("_ms"), model, dT)
    if "Best" in methods:
        best = best_candidate_oracle(dn.concat(dN), model, dT, DictionaryConfig(),
                                     stream(cfg.seed, mk, rep, rngmod.BEST))
        out["Best"] = best.error
    return out


def run_table1(cfg: ExperimentConfig) -> RunSummary:
    """Empirical L2 error of the MS, C and best-in-hindsight estimators."""
    if not cfg.model_ids:
        raise InputError("no model given")
    methods = [m for m in TABLE1_METHODS if cfg.methods is None or m in cfg.methods]
    if not methods:
        raise InputError(f"table1 needs at least one of {TABLE1_METHODS}")
    res = RunSummary("table1")
    for model in cfg.model_ids:
        reps = _map_reps(_guard(lambda r: _table1_rep(cfg, model, methods, r),
                                f"table1 {model}"), cfg)
        for rep, row in enumerate(reps):
            res.raw.append({"model": model, "n": cfg.n, "N": cfg.N, "rep": rep, **row})
            if row["status"] != "ok":
                res.failures += 1
                res.failure_messages.append(row["message"])
        for m in methods:
            vals = [row[m] for row in reps if row["status"] == "ok"]
            mu, sd = mean_std(vals)
            res.summary.append({"model": model, "method": m, "n": cfg.n, "N": cfg.N,
                                "err_mean": mu, "err_std": sd})
    if cfg.output_dir:
        write_csv(Path(cfg.output_dir) / "table1_summary.csv",
                  ["model", "method", "n", "N", "err_mean", "err_std"], res.summary)
        write_csv(Path(cfg.output_dir) / "table1_raw.csv",
                  ["model", "n", "N", "rep", "status"] + methods
                  + (CHECK_COLUMNS if {"C", "MS"} & set(methods) else []), res.raw)
    return res


# -- reject option ---------------------------------------------------------------

def _reject_rows(model, method, rep, evals, epsilons):
    return [{"model": model, "method": method, "epsilon": e, "rep": rep, "status": "ok",
             "err": ev.err, "rate": ev.rate, "degenerate": ev.degenerate}
            for e, ev in zip(epsilons, evals)]


def _summarize_reject(res, models, methods, epsilons):
    for model in models:
        for m in methods:
            for e in epsilons:
                err = res.raw_values(model, m, "err", e)
                rate = res.raw_values(model, m, "rate", e)
                em, es = mean_std(err)
                rm, rs = mean_std(rate)
                res.summary.append({"model": model, "method": m, "epsilon": e,
                                    "err_mean": em, "err_std": es,
                                    "rate_mean": rm, "rate_std": rs})


REJECT_SUMMARY_COLUMNS = ["model", "method", "epsilon", "err_mean", "err_std",
                          "rate_mean", "rate_std"]
REJECT_RAW_COLUMNS = ["model", "method", "epsilon", "rep", "status", "err", "rate", "degenerate"]


def _finish_reject(res, cfg, models, methods, prefix):
    flat = []
    for rows in res.raw:
        if isinstance(rows, list):
            flat.extend(rows)
        else:
            flat.append(rows)
    res.raw = flat
    _summarize_reject(res, models, methods, cfg.epsilons)
    if cfg.output_dir:
        write_csv(Path(cfg.output_dir) / f"{prefix}_summary.csv", REJECT_SUMMARY_COLUMNS,
                  res.summary)
        write_csv(Path(cfg.output_dir) / f"{prefix}_raw.csv", REJECT_RAW_COLUMNS, res.raw)
    return res


def _oracle_rep(cfg, model, rep):
    mk = _MODEL_KEY[model]
    data_rng = stream(cfg.seed, mk, rep, rngmod.DATA)
    x_cal = draw_features(model, cfg.calib_size, data_rng)
    dT = generate(model, cfg.T, data_rng)
    rule = oracle_predictor(model, x_cal, rng=stream(cfg.seed, mk, rep, rngmod.REJECT))
    evals = [evaluate_reject(rule, dT, e) for e in cfg.epsilons]
    return _reject_rows(model, "oracle", rep, evals, cfg.epsilons)


def _collect(res, label, reps):
    for rep, rows in enumerate(reps):
        if isinstance(rows, dict):
            res.failures += 1
            res.failure_messages.append(rows["message"])
            continue
        res.raw.append(rows)


def run_oracle_reject(cfg: ExperimentConfig) -> RunSummary:
    """Error and rejection rate of the epsilon-predictor built on the truth."""
    if not cfg.model_ids:
        raise InputError("no model given")
    res = RunSummary("oracle-reject")
    for model in cfg.model_ids:
        reps = _map_reps(_guard(lambda r: _oracle_rep(cfg, model, r), f"oracle {model}"), cfg)
        _collect(res, model, reps)
    return _finish_reject(res, cfg, cfg.model_ids, ["oracle"], "oracle_reject")


def _single_algorithm(kind, dn, dN, rng):
    """Fit f on dn, then the same algorithm on dN's squared residuals."""
    def fit(data, r):
        if kind == "tree":
            return fit_tree(data)
        if kind == "rf":
            return fit_forest(data, PLUGIN_RF_NTREE, r)
        return fit_knn(data, PLUGIN_KNN_K)

    f_hat = fit(dn, rng)
    z = (dN.y - f_hat.predict(dN.x)) ** 2
    s2 = fit(Dataset(dN.x, z), rng)
    return f_hat, lambda x: np.maximum(s2.predict(x), 0.0)


def _plugin_rep(cfg, model, methods, rep):
    mk = _MODEL_KEY[model]
    data_rng = stream(cfg.seed, mk, rep, rngmod.DATA)
    dn = generate(model, cfg.n, data_rng)
    dN = generate(model, cfg.N, data_rng)
    x_cal = draw_features(model, cfg.calib_size, data_rng)
    dT = generate(model, cfg.T, data_rng)

    fitted = {}
    if "C" in methods or "MS" in methods:
        ms, c = fit_variance_pair(dn, dN, DictionaryConfig(), stream(cfg.seed, mk, rep, rngmod.F_DICT))
        fitted["C"] = (c.predict_mean, c.predict_variance)
        fitted["MS"] = (ms.predict_mean, ms.predict_variance)
        checks = _pipeline_checks(ms, c, dT.x)
        checks.pop("_c"), checks.pop("_ms")
    else:
        checks = {}
    for j, kind in enumerate(("tree", "rf", "knn")):
        if kind in methods:
            fitted[kind] = _single_algorithm(kind, dn, dN,
                                             stream(cfg.seed, mk, rep, rngmod.PLUGIN, j))
    rows = []
    for j, m in enumerate(methods):
        f_hat, s2_hat = fitted[m]
        r = stream(cfg.seed, mk, rep, rngmod.REJECT, j)
        rule = RejectPredictor(f_hat, s2_hat, calibrate_cdf(s2_hat, x_cal, rng=r), rng=r)
        evals = [evaluate_reject(rule, dT, e) for e in cfg.epsilons]
        rows.extend(_reject_rows(model, m, rep, evals, cfg.epsilons))
    for row in rows:
        row.update(checks)
    return rows


def run_plugin_reject(cfg: ExperimentConfig) -> RunSummary:
    """Plug-in epsilon-predictors from single learners and from the aggregates."""
    if not cfg.model_ids:
        raise InputError("no model given")
    if cfg.methods is None:
        methods = ["tree", "rf", "C", "MS"]
    else:
        methods = [m for m in PLUGIN_METHODS if f"plugin-{m}" in cfg.methods]
    if not methods:
        raise InputError("plugin-reject needs at least one plugin-* method")
    res = RunSummary("plugin-reject")
    for model in cfg.model_ids:
        reps = _map_reps(_guard(lambda r: _plugin_rep(cfg, model, methods, r),
                                f"plugin {model}"), cfg)
        _collect(res, model, reps)
    return _finish_reject(res, cfg, cfg.model_ids, methods, "plugin_reject")


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
