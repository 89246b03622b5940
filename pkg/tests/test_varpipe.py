import json

import numpy as np
import pytest

from hetvar import InputError
from hetvar.aggregate import CandidateSet, convex_weights
from hetvar.regressors import ConstantRegressor, DictionaryConfig, machine_names
from hetvar.rng import stream
from hetvar.simdata import eval_sigma2_star, generate
from hetvar.varpipe import (VariancePipeline, best_candidate_oracle, candidate_matrix,
                            empirical_l2_error, fit_variance, fit_variance_pair)

SMALL = DictionaryConfig(forest_ntrees=(5, 10, 20))


@pytest.fixture(scope="module")
def samples():
    return generate("m1a1", 300, stream(1)), generate("m1a1", 300, stream(2))


@pytest.fixture(scope="module")
def pair(samples):
    dn, dN = samples
    return fit_variance_pair(dn, dN, SMALL, stream(3))


def stub_pipeline(mode, values, selector):
    f = [ConstantRegressor(0.0, 2)]
    var = [ConstantRegressor(v, 2) for v in values]
    return VariancePipeline(mode, f, 0 if mode == "MS" else np.ones(1), var, selector,
                            np.zeros(1), np.zeros(len(values)), 0.0)


def test_negative_candidate_is_clipped():
    p = stub_pipeline("MS", [-1.0], 0)
    np.testing.assert_array_equal(p.predict_variance(np.zeros((3, 2))), 0.0)


def test_convex_combination_of_stubs():
    p = stub_pipeline("C", [0.2, 1.0], np.array([0.5, 0.5]))
    np.testing.assert_allclose(p.predict_variance(np.zeros((4, 2))), 0.6)
    q = stub_pipeline("C", [-3.0, 1.0], np.array([0.5, 0.5]))
    np.testing.assert_allclose(q.predict_variance(np.zeros((1, 2))), 0.5)


def test_ms_picks_the_argmin_variance_candidate(pair):
    ms, _ = pair
    assert ms.var_selector == int(np.argmin(ms.var_risks))
    assert ms.f_selector == int(np.argmin(ms.f_risks))
    assert ms.agg_risk == pytest.approx(ms.var_risks.min())


def test_convex_does_no_worse_than_its_best_vertex(pair):
    _, c = pair
    assert c.agg_risk <= c.var_risks.min() + 1e-9
    assert np.all(c.var_selector >= 0) and abs(c.var_selector.sum() - 1) < 1e-9


def test_stage_two_targets_are_aggregate_residuals(samples, pair):
    dn, dN = samples
    _, c = pair
    z = (dN.y - c.predict_mean(dN.x)) ** 2
    cands = CandidateSet(c.variance_candidates(dN.x), z)
    np.testing.assert_allclose(cands.risks(), c.var_risks, rtol=1e-12)
    np.testing.assert_allclose(convex_weights(cands), c.var_selector, atol=1e-12)


def test_predictions_are_nonnegative(samples, pair):
    x = generate("m1a1", 500, stream(4)).x
    for p in pair:
        assert np.all(p.predict_variance(x) >= 0)


def test_pair_equals_separate_fits(samples, pair):
    dn, dN = samples
    x = dN.x[:50]
    for p, mode in zip(pair, ("MS", "C")):
        alone = fit_variance(mode, dn, dN, SMALL, stream(3))
        np.testing.assert_array_equal(alone.predict_variance(x), p.predict_variance(x))


def test_fit_is_deterministic(samples):
    dn, dN = samples
    x = dN.x[:50]
    a = fit_variance("C", dn, dN, SMALL, stream(7)).predict_variance(x)
    b = fit_variance("C", dn, dN, SMALL, stream(7)).predict_variance(x)
    np.testing.assert_array_equal(a, b)


def test_zero_noise_gives_near_zero_variance():
    dn = generate("m1a1", 500, stream(10), zero_noise=True)
    dN = generate("m1a1", 500, stream(11), zero_noise=True)
    xt = generate("m1a1", 1000, stream(12)).x
    for mode in ("MS", "C"):
        p = fit_variance(mode, dn, dN, rng=stream(13))
        assert np.mean(p.predict_variance(xt) ** 2) <= 1e-2, mode


def test_summary_json(pair):
    s = json.loads(pair[1].summary_json())
    assert s["mode"] == "C" and s["machines"] == machine_names(SMALL)
    assert len(s["var_selector"]) == 12


def test_bad_inputs(samples):
    dn, dN = samples
    with pytest.raises(InputError):
        fit_variance("XX", dn, dN)
    with pytest.raises(InputError):
        fit_variance("C", dn, generate("m4", 50, stream(1)))
    with pytest.raises(InputError, match="regression dictionary"):
        fit_variance("C", dn.take(np.arange(10)), dN, SMALL, stream(1))


def test_empirical_l2_error_examples():
    dT = generate("m4", 200, stream(5))
    truth = eval_sigma2_star("m4", dT.x)
    assert empirical_l2_error(truth, "m4", dT) == 0.0
    assert empirical_l2_error(lambda x: eval_sigma2_star("m4", x) + 0.5, "m4", dT) == \
        pytest.approx(0.25)
    # a constant at the sample mean scores the sample variance
    c = truth.mean()
    assert empirical_l2_error(np.full(200, c), "m4", dT) == pytest.approx(truth.var(), rel=1e-12)
    assert empirical_l2_error(ConstantRegressor(c, 2), "m4", dT.x) == \
        pytest.approx(truth.var(), rel=1e-12)
    with pytest.raises(InputError):
        empirical_l2_error(truth, "m4", dT.x[:0])


def test_best_candidate_is_the_table_minimum():
    d_all = generate("m4", 200, stream(6))
    dT = generate("m4", 300, stream(7))
    best = best_candidate_oracle(d_all, "m4", dT, SMALL, stream(8))
    assert best.errors.shape == (12, 12)
    assert best.error == best.errors.min() == best.errors[best.f_index, best.var_index]
    assert np.all(best.errors >= 0)


def test_candidate_matrix_columns():
    machines = [ConstantRegressor(v, 1) for v in (1.0, -2.0)]
    np.testing.assert_array_equal(candidate_matrix(machines, np.zeros((3, 1))),
                                  [[1, -2]] * 3)
