"""
Tests for forest fitting, per-instance panels and the plain RF prediction.
"""

import json

import numpy as np
import pytest

from abrf.data import gen_friedman
from abrf.errors import ConfigError, DatasetError
from abrf.forest import (
    Forest,
    ForestConfig,
    bootstrap_indices,
    fit_forest,
    panel,
    panel_batch,
    predict_baseline,
    predict_baseline_batch,
)
from abrf.tree import GrowthCondition, LeafStats, Tree


def stump(mean_vector, value=None, dist=None):
    """Tree with a single leaf: every query lands on (mean_vector, value/dist)."""
    mode = "regression" if dist is None else "classification"
    leaf = LeafStats([0], mean_vector, mean_target=value, class_dist=dist)
    return Tree([-1], [0.0], [-1], [-1], [0], [leaf], mode, "cart", len(mean_vector),
                None if dist is None else len(dist))


def toy_forest(trees, mode="regression", n_classes=None):
    return Forest(trees, ForestConfig(n_trees=len(trees)), mode, trees[0].n_features, n_classes)


@pytest.fixture(scope="module")
def friedman():
    return gen_friedman(1, n=80, noise_sd=0.5, seed=0)


def test_forest_has_requested_trees(friedman):
    forest = fit_forest(friedman, ForestConfig(n_trees=100, seed=1))
    assert forest.n_trees == 100
    assert forest.n_features == 10


def test_same_config_same_forest(friedman):
    config = ForestConfig(n_trees=5, ensemble="ert", seed=3)
    a, b = fit_forest(friedman, config), fit_forest(friedman, config, workers=3)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_ert_single_tree_uses_full_sample(friedman):
    forest = fit_forest(friedman, ForestConfig(n_trees=1, ensemble="ert",
                                               condition=GrowthCondition.min_leaf(1), seed=0))
    members = np.sort(np.concatenate([leaf.member_indices for leaf in forest.trees[0].leaves]))
    np.testing.assert_array_equal(members, np.arange(friedman.n))


def test_bootstrap_is_multiset_of_size_n():
    sample = bootstrap_indices(50, np.random.SeedSequence(0))
    assert len(sample) == 50
    assert sample.min() >= 0 and sample.max() < 50
    assert len(np.unique(sample)) < 50


def test_rf_trees_see_bootstrap_samples(friedman):
    forest = fit_forest(friedman, ForestConfig(n_trees=3, seed=2))
    for tree in forest.trees:
        members = np.concatenate([leaf.member_indices for leaf in tree.leaves])
        assert len(members) == friedman.n
        assert len(np.unique(members)) < friedman.n


def test_forest_config_validation():
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)
    with pytest.raises(ConfigError):
        ForestConfig(ensemble="gbm")


def test_panel_zero_distance_at_leaf_mean():
    forest = toy_forest([stump([1.0, 2.0], 5.0), stump([0.0, 0.0], 1.0)])
    p = panel(forest, [1.0, 2.0])
    np.testing.assert_allclose(p.distances, [0.0, 5.0])


def test_panel_hand_distances():
    forest = toy_forest([stump([0.0, 0.0], 1.0), stump([1.0, 1.0], 2.0), stump([3.0, -1.0], 3.0)])
    p = panel(forest, [1.0, 2.0])
    np.testing.assert_allclose(p.distances, [1 + 4, 0 + 1, 4 + 9])
    np.testing.assert_allclose(p.values, [1.0, 2.0, 3.0])


def test_panel_uniform_feature_weights():
    forest = toy_forest([stump([0.0, 0.0], 1.0), stump([2.0, 4.0], 2.0)])
    p = panel(forest, [1.0, 2.0], z=[0.5, 0.5])
    # each coordinate difference is scaled by 1/2 before squaring
    np.testing.assert_allclose(p.distances, [(0.5 * 1) ** 2 + (0.5 * 2) ** 2, (0.5 * 1) ** 2 + (0.5 * 2) ** 2])


def test_panel_rejects_bad_input():
    forest = toy_forest([stump([0.0, 0.0], 1.0)])
    with pytest.raises(DatasetError):
        panel(forest, [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        panel(forest, [1.0, 2.0], z=[0.7, 0.7])


def test_panel_tree_permutation():
    trees = [stump([0.0, 0.0], 1.0), stump([1.0, 1.0], 2.0), stump([3.0, -1.0], 3.0)]
    a = panel(toy_forest(trees), [0.5, 0.5]).distances
    b = panel(toy_forest(trees[::-1]), [0.5, 0.5]).distances
    np.testing.assert_allclose(a, b[::-1])


def test_predict_baseline_regression_mean():
    forest = toy_forest([stump([0.0], 1.0), stump([0.0], 3.0)])
    assert predict_baseline(forest, [0.3]) == pytest.approx(2.0)


def test_predict_baseline_identical_trees():
    forest = toy_forest([stump([0.0], 4.5)] * 3)
    assert predict_baseline(forest, [9.0]) == pytest.approx(4.5)


def test_predict_baseline_classification():
    forest = toy_forest([stump([0.0], dist=[0.2, 0.8]), stump([0.0], dist=[0.6, 0.4])],
                        mode="classification", n_classes=2)
    dist, label = predict_baseline(forest, [0.0])
    np.testing.assert_allclose(dist, [0.4, 0.6])
    assert label == 1


def test_predict_baseline_tie_goes_to_lowest_class():
    forest = toy_forest([stump([0.0], dist=[0.5, 0.5])], mode="classification", n_classes=2)
    assert predict_baseline(forest, [0.0])[1] == 0


def test_batch_matches_single(friedman):
    forest = fit_forest(friedman, ForestConfig(n_trees=7, seed=5))
    batch = panel_batch(forest, friedman.features[:5])
    preds = predict_baseline_batch(forest, friedman.features[:5])
    for i in range(5):
        single = panel(forest, friedman.features[i])
        np.testing.assert_allclose(batch.distances[i], single.distances)
        assert preds[i] == pytest.approx(predict_baseline(forest, friedman.features[i]))


def test_forest_dict_round_trip(friedman):
    forest = fit_forest(friedman, ForestConfig(n_trees=4, ensemble="ert", seed=8))
    again = Forest.from_dict(json.loads(json.dumps(forest.to_dict())))
    np.testing.assert_allclose(predict_baseline_batch(again, friedman.features),
                               predict_baseline_batch(forest, friedman.features))
    assert again.config.to_dict() == forest.config.to_dict()
