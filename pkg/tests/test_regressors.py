import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetvar import InputError, NumericalError
from hetvar.regressors import (DictionaryConfig, TreeParams, build_dictionary, fit_enet,
                               fit_forest, fit_knn, fit_lasso, fit_ridge, fit_tree,
                               machine_names)
from hetvar.regressors._linear import standardize
from hetvar.rng import stream
from hetvar.simdata import Dataset, eval_f_star, eval_sigma2_star, generate


def line_data():
    return Dataset(np.arange(5.0)[:, None], np.arange(5.0))


def random_data(seed, n=40, d=3):
    r = np.random.default_rng(seed)
    x = r.random((n, d))
    return Dataset(x, x @ r.normal(size=d) + r.normal(size=n))


# -- kNN -------------------------------------------------------------------

def knn_oracle(xt, yt, q, k):
    order = sorted(range(len(xt)), key=lambda i: (float(np.sum((xt[i] - q) ** 2)), i))
    return float(np.mean(yt[order[:k]]))


def test_knn_hand_example():
    assert knn_oracle(line_data().x, line_data().y, np.array([1.6]), 2) == 1.5
    assert fit_knn(line_data(), 2).predict(np.array([[1.6]]))[0] == 1.5


def test_knn_full_k_is_mean_and_k1_interpolates():
    d = random_data(0)
    q = np.random.default_rng(1).random((7, 3))
    np.testing.assert_allclose(fit_knn(d, d.n).predict(q), d.y.mean(), atol=1e-12)
    np.testing.assert_array_equal(fit_knn(d, 1).predict(d.x), d.y)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 12))
def test_knn_matches_brute_force_with_ties(seed, k):
    r = np.random.default_rng(seed)
    # integer grid: many equal distances, exercising the lowest-index rule
    xt = r.integers(0, 4, size=(15, 2)).astype(float)
    yt = r.normal(size=15)
    q = r.integers(0, 4, size=(6, 2)).astype(float)
    got = fit_knn(Dataset(xt, yt), k).predict(q)
    want = [knn_oracle(xt, yt, qi, k) for qi in q]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_knn_rejects_bad_k():
    with pytest.raises(InputError):
        fit_knn(line_data(), 6)
    with pytest.raises(InputError):
        fit_knn(line_data(), 0)


# -- ridge / lasso / elastic net ---------------------------------------------

def test_ridge_exact_line():
    x = np.linspace(0, 1, 9)
    m = fit_ridge(Dataset(x[:, None], 2 * x), 0.0)
    assert m.coef[0] == pytest.approx(2.0, abs=1e-10)
    assert m.intercept == pytest.approx(0.0, abs=1e-10)


def test_ridge_huge_penalty_is_mean():
    d = random_data(2)
    np.testing.assert_allclose(fit_ridge(d, 1e9).predict(d.x), d.y.mean(), atol=1e-3)


def test_ridge_three_points_against_cramer():
    x = np.array([[0.0, 1.0], [1.0, 0.5], [3.0, 2.0]])
    y = np.array([1.0, 2.0, 0.5])
    lam, n = 1.0, 3
    # standardize by hand
    xs = (x - x.mean(0)) / np.sqrt(((x - x.mean(0)) ** 2).mean(0))
    yc = y - y.mean()
    a11 = xs[:, 0] @ xs[:, 0] / n + lam
    a22 = xs[:, 1] @ xs[:, 1] / n + lam
    a12 = xs[:, 0] @ xs[:, 1] / n
    b1, b2 = xs[:, 0] @ yc / n, xs[:, 1] @ yc / n
    det = a11 * a22 - a12 * a12
    want = np.array([(b1 * a22 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det])
    np.testing.assert_allclose(fit_ridge(Dataset(x, y), lam).coef_std, want, atol=1e-12)


def test_ridge_collinear_unpenalized_fails():
    x = np.linspace(0, 1, 10)
    with pytest.raises(NumericalError):
        fit_ridge(Dataset(np.column_stack([x, 2 * x]), x), 0.0)


def test_lasso_zero_penalty_is_ols():
    d = random_data(3, n=60, d=4)
    ols = np.linalg.lstsq(np.column_stack([np.ones(d.n), d.x]), d.y, rcond=None)[0]
    m = fit_lasso(d, 0.0)
    np.testing.assert_allclose(m.coef, ols[1:], atol=1e-5)
    assert m.intercept == pytest.approx(ols[0], abs=1e-5)


def test_lasso_kill_condition():
    d = random_data(4)
    xs, yc, *_ = standardize(d.x, d.y)
    lam_max = np.max(np.abs(xs.T @ yc / d.n))
    m = fit_lasso(d, lam_max * 1.0000001)
    assert np.all(m.coef == 0.0)
    np.testing.assert_allclose(m.predict(d.x), d.y.mean(), atol=1e-12)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 2.0])
def test_lasso_univariate_closed_form(lam):
    r = np.random.default_rng(5)
    x = r.random(50)
    y = 3 * x + r.normal(size=50)
    xs = (x - x.mean()) / x.std()
    c = xs @ (y - y.mean()) / 50
    want = np.sign(c) * max(abs(c) - lam, 0.0)  # standardized var(x) = 1
    assert fit_lasso(Dataset(x[:, None], y), lam).coef_std[0] == pytest.approx(want, abs=1e-9)


def lasso_kkt_violation(d, m):
    xs, yc, *_ = standardize(d.x, d.y)
    grad = xs.T @ (yc - xs @ m.coef_std) / d.n
    b = m.coef_std
    active = b != 0
    viol = np.zeros_like(b)
    viol[active] = np.abs(grad[active] - m.lam * np.sign(b[active]))
    viol[~active] = np.maximum(np.abs(grad[~active]) - m.lam, 0.0)
    return viol.max()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0.0, 1.0))
def test_lasso_kkt(seed, lam):
    d = random_data(seed, n=30, d=5)
    assert lasso_kkt_violation(d, fit_lasso(d, lam)) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0.01, 5.0))
def test_ridge_equals_enet_alpha_zero(seed, lam):
    d = random_data(seed, n=25, d=4)
    np.testing.assert_allclose(fit_enet(d, lam, 0.0).coef, fit_ridge(d, lam).coef, atol=1e-5)


def test_enet_nonconvergence_carries_iterate():
    d = random_data(6, n=30, d=6)
    with pytest.raises(NumericalError) as info:
        fit_enet(d, 0.01, 0.5, max_sweeps=1, tol=1e-15)
    assert info.value.last_iterate is not None and info.value.last_iterate.shape == (6,)


def test_enet_rejects_bad_alpha():
    with pytest.raises(InputError):
        fit_enet(random_data(7), 1.0, 1.5)


# -- trees -----------------------------------------------------------------

def cart_oracle(x, y, min_leaf, min_split, max_depth, depth=0):
    """Naive recursive CART: exhaustive scan, returns a predict function."""
    mean = y.mean()
    best = None
    if len(y) >= min_split and depth < max_depth and np.var(y) > 0:
        base = np.sum((y - mean) ** 2)
        for f in range(x.shape[1]):
            vals = np.unique(x[:, f])
            for a, b in zip(vals[:-1], vals[1:]):
                thr = (a + b) / 2
                lm = x[:, f] <= thr
                if lm.sum() < min_leaf or (~lm).sum() < min_leaf:
                    continue
                sse = np.sum((y[lm] - y[lm].mean()) ** 2) + np.sum((y[~lm] - y[~lm].mean()) ** 2)
                gain = base - sse
                if gain > 1e-9 and (best is None or gain > best[0] + 1e-9):
                    best = (gain, f, thr)
    if best is None:
        return lambda q: np.full(len(q), mean)
    _, f, thr = best
    lm = x[:, f] <= thr
    lo = cart_oracle(x[lm], y[lm], min_leaf, min_split, max_depth, depth + 1)
    hi = cart_oracle(x[~lm], y[~lm], min_leaf, min_split, max_depth, depth + 1)

    def predict(q):
        go = q[:, f] <= thr
        out = np.empty(len(q))
        if go.any():
            out[go] = lo(q[go])
        if (~go).any():
            out[~go] = hi(q[~go])
        return out
    return predict


def test_tree_constant_response_is_one_leaf():
    d = Dataset(np.random.default_rng(0).random((30, 2)), np.full(30, 4.2))
    t = fit_tree(d)
    assert t.n_leaves == 1 and t.root_split is None
    np.testing.assert_allclose(t.predict(d.x), 4.2, rtol=1e-14)


def test_tree_step_data_root_split():
    d = Dataset(np.array([[0.0], [1.0], [2.0], [3.0]]), np.array([0.0, 0.0, 1.0, 1.0]))
    t = fit_tree(d, TreeParams(max_depth=30, min_leaf=1, min_split=2))
    assert t.root_split == (0, 1.5)
    np.testing.assert_array_equal(t.predict(np.array([[0.5], [2.5]])), [0.0, 1.0])


def test_tree_depth_zero_is_mean():
    d = random_data(8)
    t = fit_tree(d, TreeParams(max_depth=0))
    np.testing.assert_allclose(t.predict(d.x), d.y.mean(), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), min_leaf=st.integers(1, 4), depth=st.integers(1, 6))
def test_tree_matches_naive_cart(seed, min_leaf, depth):
    r = np.random.default_rng(seed)
    x = np.round(r.random((40, 2)), 2)
    y = np.sin(6 * x[:, 0]) + x[:, 1] + 0.1 * r.normal(size=40)
    params = TreeParams(max_depth=depth, min_leaf=min_leaf, min_split=2 * min_leaf)
    got = fit_tree(Dataset(x, y), params).predict(x)
    want = cart_oracle(x, y, min_leaf, 2 * min_leaf, depth)(x)
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_tree_params_validation():
    with pytest.raises(InputError):
        TreeParams(min_leaf=0)
    with pytest.raises(InputError):
        TreeParams(min_leaf=5, min_split=9)


# -- forests ---------------------------------------------------------------

def test_degenerate_forest_is_a_tree():
    d = random_data(9, n=80)
    p = TreeParams(max_depth=30, min_leaf=5, min_split=10)
    f = fit_forest(d, 1, stream(1), mtry=d.d, bootstrap=False, params=p)
    np.testing.assert_array_equal(f.predict(d.x), fit_tree(d, p).predict(d.x))


def test_forest_constant_response():
    d = Dataset(np.random.default_rng(1).random((50, 3)), np.full(50, -1.5))
    for ntree in (1, 7):
        np.testing.assert_allclose(fit_forest(d, ntree, stream(2)).predict(d.x), -1.5,
                                   rtol=0, atol=1e-14)


def test_forest_deterministic_given_seed():
    d = random_data(10, n=100)
    a = fit_forest(d, 20, stream(3)).predict(d.x)
    b = fit_forest(d, 20, stream(3)).predict(d.x)
    c = fit_forest(d, 20, stream(4)).predict(d.x)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_is_mean_of_its_trees():
    d = random_data(11, n=100)
    f = fit_forest(d, 15, stream(5))
    q = np.random.default_rng(2).random((30, 3))
    per_tree = np.array([t.predict(q) for t in f.trees])
    np.testing.assert_array_equal(f.predict(q), np.mean(per_tree, axis=0))


def test_forest_defaults():
    d = random_data(12, n=60, d=10)
    assert fit_forest(d, 2, stream(1)).mtry == 3
    assert fit_forest(random_data(12, d=2), 2, stream(1)).mtry == 1


# -- shared properties and the dictionary --------------------------------------

def test_constant_predictor_agreement():
    d = random_data(13)
    q = np.random.default_rng(3).random((10, 3))
    mean = d.y.mean()
    np.testing.assert_allclose(fit_knn(d, d.n).predict(q), mean, atol=1e-9)
    np.testing.assert_allclose(fit_tree(d, TreeParams(max_depth=0)).predict(q), mean, atol=1e-9)
    np.testing.assert_allclose(fit_ridge(d, 1e12).predict(q), mean, atol=1e-9)


def test_fits_deterministic():
    d = random_data(14, n=60)
    for fit in (lambda: fit_knn(d, 5), lambda: fit_ridge(d, 0.9), lambda: fit_lasso(d, 0.1),
                lambda: fit_enet(d, 1.0, 0.6), lambda: fit_tree(d)):
        np.testing.assert_array_equal(fit().predict(d.x), fit().predict(d.x))


def test_dictionary_layout():
    d = generate("m1a1", 60, stream(1))
    machines = build_dictionary(d, DictionaryConfig(), stream(2))
    assert len(machines) == 12
    kinds = [m.kind for m in machines]
    assert kinds == ["forest"] * 3 + ["knn"] * 3 + ["lasso"] * 2 + ["ridge"] * 2 + ["tree", "enet"]
    assert [m.ntree for m in machines[:3]] == [50, 150, 500]
    assert all(m.mtry == 1 for m in machines[:3])
    assert [m.k for m in machines[3:6]] == [7, 13, 22]
    assert [m.lam for m in machines[6:10]] == [0.5, 2.0, 0.9, 3.0]
    assert (machines[11].lam, machines[11].alpha) == (1.0, 0.6)
    assert machine_names()[0] == "forest_50" and len(machine_names()) == 12


def test_dictionary_needs_enough_rows():
    with pytest.raises(InputError):
        build_dictionary(generate("m1a1", 20, stream(1)), rng=stream(2))


def test_dictionary_annotates_machine_on_failure():
    x = np.linspace(0, 1, 30)
    d = Dataset(np.column_stack([x, x]), x)
    cfg = DictionaryConfig(ridge_lambdas=(0.0, 3.0))
    with pytest.raises(NumericalError, match="machine 8"):
        build_dictionary(d, cfg, stream(1))


def test_dictionary_machines_beat_constant_baseline():
    # E[(Y - f_hat)^2] = E[sigma^2] + E[(f - f_hat)^2]; a constant predictor pays Var f
    model = "m1a025"
    train = generate(model, 1000, stream(20))
    test = generate(model, 20000, stream(21))
    baseline = eval_sigma2_star(model, test.x).mean() + eval_f_star(model, test.x).var()
    for name, m in zip(machine_names(), build_dictionary(train, rng=stream(22))):
        mse = np.mean((test.y - m.predict(test.x)) ** 2)
        # a single deep tree pays leaf-mean variance of roughly E[sigma^2] / min_leaf
        assert mse < baseline + (0.15 if name == "tree" else 0.01), name
