"""
Tests for the attention weight functions and the weighted combiners.
"""

import numpy as np
import pytest

from abrf.attention import (
    AttentionParams,
    abrf1_weights,
    abrf2_weights,
    abrf3_weights,
    contaminate,
    model_weights,
    on_simplex,
    predict_classification,
    predict_regression,
    softmax_scores,
    uniform,
)
from abrf.data import gen_friedman
from abrf.errors import ConfigError
from abrf.forest import (
    ForestConfig,
    InstancePanel,
    PanelBatch,
    fit_forest,
    panel,
    panel_batch,
    predict_baseline,
    predict_baseline_batch,
)


def test_softmax_equal_distances_uniform():
    np.testing.assert_allclose(softmax_scores([3.0, 3.0, 3.0, 3.0], tau=0.7), np.full(4, 0.25))


def test_softmax_hand_value():
    D = softmax_scores([0.0, 2.0], tau=1.0)
    e = np.exp(-1.0)
    np.testing.assert_allclose(D, [1 / (1 + e), e / (1 + e)])
    np.testing.assert_allclose(D, [0.7311, 0.2689], atol=1e-4)


def test_softmax_large_tau_uniform():
    np.testing.assert_allclose(softmax_scores([0.0, 5.0, 80.0], tau=1e12), np.full(3, 1 / 3), atol=1e-9)


def test_softmax_shift_invariant_and_decreasing():
    d = np.array([0.3, 1.2, 4.0])
    np.testing.assert_allclose(softmax_scores(d, 0.5), softmax_scores(d + 17.0, 0.5))
    D = softmax_scores(d, 0.5)
    assert D[0] > D[1] > D[2]
    bumped = softmax_scores(d + np.array([0.0, 0.5, 0.0]), 0.5)
    assert bumped[1] < D[1]


def test_softmax_positive_sign_prefers_far_leaves():
    D = softmax_scores([0.0, 2.0], tau=1.0, sign=1)
    assert D[1] > D[0]


def test_softmax_huge_distances_stay_finite():
    D = softmax_scores([1e300, 1e300, 0.0], tau=1e-3)
    assert np.all(np.isfinite(D))
    assert on_simplex(D)


def test_contaminate_endpoints_and_hand_value():
    D, w = np.array([0.5, 0.5]), np.array([1.0, 0.0])
    np.testing.assert_allclose(contaminate(D, w, 0.0), D)
    np.testing.assert_allclose(contaminate(D, w, 1.0), w)
    np.testing.assert_allclose(contaminate(D, w, 0.5), [0.75, 0.25])


def test_contaminate_affine_in_epsilon():
    rng = np.random.default_rng(0)
    D, w = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    for eps in (0.1, 0.37, 0.9):
        expected = (1 - eps) * contaminate(D, w, 0.0) + eps * contaminate(D, w, 1.0)
        np.testing.assert_allclose(contaminate(D, w, eps), expected, atol=1e-15)


def test_abrf2_hand_case():
    alpha = abrf2_weights(np.array([1.0, 4.0]), v=[0.5, 0.5])
    np.testing.assert_allclose(alpha, [0.6792, 0.3208], atol=1e-4)


def test_abrf2_zero_scale_ignores_distance():
    near = abrf2_weights(np.array([1.0, 0.0]), v=[1.0, 0.0])
    far = abrf2_weights(np.array([1.0, 1e6]), v=[1.0, 0.0])
    np.testing.assert_allclose(near, far)


def test_abrf2_uniform_on_equal_distances():
    p = InstancePanel(np.ones((4, 3)), np.zeros((4, 3)), values=np.arange(4.0))
    np.testing.assert_allclose(abrf2_weights(p, uniform(4), uniform(3)), np.full(4, 0.25))


def test_abrf2_uses_feature_weights():
    sq = np.array([[1.0, 0.0], [0.0, 1.0]])
    p = InstancePanel(sq, np.zeros((2, 2)), values=np.zeros(2))
    alpha = abrf2_weights(p, v=[0.5, 0.5], z=[1.0, 0.0])
    # tree 1 differs only in the first feature, which carries all the weight
    np.testing.assert_allclose(alpha, abrf2_weights(np.array([1.0, 0.0]), v=[0.5, 0.5]))


def test_abrf3_endpoints_and_mix():
    p = InstancePanel(np.array([[1.0, 2.0], [0.5, 0.0], [3.0, 1.0]]), np.zeros((3, 2)), values=np.zeros(3))
    v, z, w = np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.4]), np.array([0.1, 0.1, 0.8])
    S = abrf2_weights(p, v, z)
    params = AttentionParams(epsilon=1.0, v=v, z=z, w=w)
    np.testing.assert_allclose(abrf3_weights(p, params), w)
    np.testing.assert_allclose(abrf3_weights(p, params.replace(epsilon=0.0)), S)
    np.testing.assert_allclose(abrf3_weights(p, params.replace(epsilon=0.5)), 0.5 * S + 0.5 * w)


def test_weights_stay_on_simplex():
    # 200 parameter draws x 50 query rows = 10^4 random inputs per model
    rng = np.random.default_rng(42)
    for _ in range(200):
        T, m = rng.integers(1, 12), rng.integers(1, 6)
        sq = rng.exponential(3.0, (50, T, m)) * rng.choice([1e-6, 1.0, 1e6], size=(50, 1, 1))
        batch = PanelBatch(sq, np.zeros((50, T, m)), values=np.zeros((50, T)))
        params = AttentionParams(epsilon=rng.uniform(), tau=10 ** rng.uniform(-3, 3),
                                 w=rng.dirichlet(np.ones(T)), v=rng.dirichlet(np.ones(T)),
                                 z=rng.dirichlet(np.ones(m)), softmax_sign=int(rng.choice([-1, 1])))
        for model in ("softmax", "abrf1-qp", "abrf2", "abrf3"):
            alpha = model_weights(model, batch, params)
            assert alpha.shape == (50, T)
            assert np.all(np.isfinite(alpha))
            assert on_simplex(alpha)


@pytest.mark.parametrize("model", ["abrf1-qp", "abrf3"])
def test_full_contamination_with_uniform_w_is_the_baseline(model):
    ds = gen_friedman(2, n=50, noise_sd=5.0, seed=3)
    forest = fit_forest(ds, ForestConfig(n_trees=7, seed=4))
    batch = panel_batch(forest, ds.features)
    params = AttentionParams(epsilon=1.0, tau=0.3, w=uniform(7))
    got = predict_regression(model_weights(model, batch, params), batch.values)
    assert np.abs(got - predict_baseline_batch(forest, ds.features)).max() < 1e-12


def test_predict_regression_cases():
    assert predict_regression([0.75, 0.25], [2.0, 6.0]) == pytest.approx(3.0)
    assert predict_regression([1.0, 0.0, 0.0], [7.0, 1.0, 2.0]) == pytest.approx(7.0)


def test_predict_classification_cases():
    p, label = predict_classification([1.0, 0.0], [[0.3, 0.7], [0.9, 0.1]])
    np.testing.assert_allclose(p, [0.3, 0.7])
    p, label = predict_classification([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(p, [0.5, 0.5])
    assert label == 0
    p, label = predict_classification([0.25, 0.75], [[0.8, 0.2], [0.2, 0.8]])
    np.testing.assert_allclose(p, [0.35, 0.65])
    assert label == 1
    assert abs(p.sum() - 1.0) < 1e-12


def test_uniform_attention_matches_baseline():
    ds = gen_friedman(1, n=60, noise_sd=0.3, seed=1)
    forest = fit_forest(ds, ForestConfig(n_trees=9, seed=2))
    for i in range(0, 60, 11):
        p = panel(forest, ds.features[i])
        got = predict_regression(uniform(forest.n_trees), p.values)
        assert abs(got - predict_baseline(forest, ds.features[i])) < 1e-12


def test_model_weights_baseline_and_softmax_batch():
    ds = gen_friedman(2, n=30, seed=0)
    forest = fit_forest(ds, ForestConfig(n_trees=4, seed=0))
    batch = panel_batch(forest, ds.features)
    params = AttentionParams(tau=2.0)
    np.testing.assert_allclose(model_weights("baseline", batch, params), np.full((30, 4), 0.25))
    np.testing.assert_allclose(model_weights("softmax", batch, params),
                               softmax_scores(batch.distances, 2.0))
    np.testing.assert_allclose(model_weights("abrf1-qp", batch, params.replace(epsilon=0.0)),
                               softmax_scores(batch.distances, 2.0))


def test_abrf1_weights_uses_w():
    params = AttentionParams(epsilon=1.0, tau=1.0, w=[0.0, 1.0])
    np.testing.assert_allclose(abrf1_weights([0.0, 5.0], params), [0.0, 1.0])


def test_params_validation_and_round_trip():
    with pytest.raises(ConfigError):
        AttentionParams(epsilon=1.5)
    with pytest.raises(ConfigError):
        AttentionParams(tau=0.0)
    with pytest.raises(ConfigError):
        AttentionParams(w=[0.5, 0.6])
    with pytest.raises(ConfigError):
        model_weights("gbm", InstancePanel(np.ones((2, 1)), np.zeros((2, 1))), AttentionParams())
    params = AttentionParams(epsilon=0.25, tau=3.0, w=[0.2, 0.8], meta={"solver": "qp"})
    again = AttentionParams.from_dict(params.to_dict())
    assert again.epsilon == 0.25 and again.tau == 3.0
    np.testing.assert_array_equal(again.w, params.w)
    assert again.meta == {"solver": "qp"}
