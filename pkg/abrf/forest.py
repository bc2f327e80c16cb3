"""
Tree ensembles and the per-instance inputs of the attention mechanism.

A forest is T trees fit either on bootstrap samples (ensemble "rf") or on
the full sample with random thresholds (ensemble "ert"). Routing a query
x through every tree gives, per tree k, the leaf mean vector A_k(x), the
leaf value B_k(x) (or class distribution p_k(x)) and the squared distance
||(x - A_k(x)) * z||^2.

Usage:
    config = ForestConfig(n_trees=100, ensemble="rf", condition=GrowthCondition.from_number(2))
    forest = fit_forest(train, config)
    batch = panel_batch(forest, test.features)
    y_hat = predict_baseline_batch(forest, test.features)
"""

from typing import List, Optional

import numpy as np

from abrf.data import Dataset, as_feature_matrix
from abrf.errors import ConfigError, DatasetError, SchemaMismatchError
from abrf.parallel import gather_threads
from abrf.tree import FORMAT_VERSION, GrowthCondition, Tree, fit_tree

ENSEMBLES = ("rf", "ert")


class ForestConfig:
    """T, ensemble kind, growth condition, feature subsampling and seed."""

    def __init__(self, n_trees=100, ensemble="rf", condition: Optional[GrowthCondition] = None,
                 max_features=None, seed=0):
        if int(n_trees) < 1:
            raise ConfigError(f"n_trees must be a positive integer, got {n_trees!r}")
        if ensemble not in ENSEMBLES:
            raise ConfigError(f"ensemble must be one of {ENSEMBLES}, got {ensemble!r}")
        self.n_trees = int(n_trees)
        self.ensemble = ensemble
        self.condition = condition or GrowthCondition.from_number(2)
        self.max_features = None if max_features is None else int(max_features)
        self.seed = int(seed)

    @property
    def splitter(self):
        return "ert" if self.ensemble == "ert" else "cart"

    def to_dict(self):
        return {
            "n_trees": self.n_trees,
            "ensemble": self.ensemble,
            "condition": self.condition.to_dict(),
            "max_features": self.max_features,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(n_trees=data["n_trees"], ensemble=data["ensemble"],
                   condition=GrowthCondition.from_dict(data["condition"]),
                   max_features=data.get("max_features"), seed=data.get("seed", 0))


class Forest:
    def __init__(self, trees: List[Tree], config: ForestConfig, mode, n_features,
                 n_classes=None, feature_names=None, class_labels=None):
        if not trees:
            raise ConfigError("a forest needs at least one tree")
        for tree in trees:
            if tree.mode != mode or tree.n_features != n_features:
                raise SchemaMismatchError("all trees must share the task and the number of features")
        self.trees = list(trees)
        self.config = config
        self.mode = mode
        self.n_features = int(n_features)
        self.n_classes = None if n_classes is None else int(n_classes)
        self.feature_names = list(feature_names) if feature_names else [f"x{j + 1}" for j in range(n_features)]
        self.class_labels = list(class_labels) if class_labels is not None else None

    def __repr__(self):
        return f"<Forest {self.config.ensemble} T={self.n_trees} m={self.n_features} {self.mode}>"

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def is_classification(self):
        return self.mode == "classification"

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "mode": self.mode,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "feature_names": self.feature_names,
            "class_labels": self.class_labels,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported forest format version {data.get('format_version')!r}")
        return cls([Tree.from_dict(t) for t in data["trees"]], ForestConfig.from_dict(data["config"]),
                   data["mode"], data["n_features"], data.get("n_classes"),
                   data.get("feature_names"), data.get("class_labels"))


def _tree_seeds(config: ForestConfig):
    return np.random.SeedSequence(config.seed).spawn(config.n_trees)


def bootstrap_indices(n, seed_sequence):
    """n draws with replacement from range(n)."""
    return np.random.default_rng(seed_sequence).integers(0, n, size=n)


def fit_forest(ds: Dataset, config: ForestConfig, workers=1) -> Forest:
    """Fit config.n_trees trees; per-tree seeds are fixed before any tree is grown."""
    jobs = []
    for child in _tree_seeds(config):
        sample_seed, split_seed = child.spawn(2)
        if config.ensemble == "rf":
            sample = bootstrap_indices(ds.n, sample_seed)
        else:
            sample = np.arange(ds.n)
        jobs.append((sample, split_seed))

    def grow(job):
        sample, split_seed = job
        return fit_tree(ds, sample, config.condition, splitter=config.splitter,
                        max_features=config.max_features, seed=split_seed)

    trees = gather_threads(grow, jobs, limit=workers)
    return Forest(trees, config, ds.task, ds.m, ds.n_classes, ds.feature_names, ds.class_labels)


def check_feature_weights(z, m):
    if z is None:
        return None
    z = np.asarray(z, dtype=float)
    if z.shape != (m,):
        raise DatasetError(f"feature weights must have length {m}, got {z.shape}")
    if np.any(z < 0) or abs(z.sum() - 1.0) > 1e-9:
        raise ConfigError("feature weights z must be nonnegative and sum to 1")
    return z


class PanelBatch:
    """
    Attention inputs for N query rows.

    sq_diffs     N x T x m squared coordinate differences (x - A_k(x))^2
    leaf_means   N x T x m mean vectors A_k(x)
    values       N x T leaf mean targets B_k(x) (regression)
    dists        N x T x C leaf class distributions p_k(x) (classification)
    """

    def __init__(self, sq_diffs, leaf_means, values=None, dists=None):
        self.sq_diffs = sq_diffs
        self.leaf_means = leaf_means
        self.values = values
        self.dists = dists
        self.distances = sq_diffs.sum(axis=2)

    def __len__(self):
        return self.sq_diffs.shape[0]

    @property
    def n_trees(self):
        return self.sq_diffs.shape[1]

    @property
    def n_features(self):
        return self.sq_diffs.shape[2]

    @property
    def is_classification(self):
        return self.dists is not None

    def weighted_distances(self, z=None):
        """||(x - A_k) * z||^2 per row and tree; unweighted when z is None."""
        if z is None:
            return self.distances
        z = np.asarray(z, dtype=float)
        return self.sq_diffs @ (z * z)

    def take(self, indices) -> "PanelBatch":
        indices = np.asarray(indices, dtype=np.int64)
        return PanelBatch(self.sq_diffs[indices], self.leaf_means[indices],
                          None if self.values is None else self.values[indices],
                          None if self.dists is None else self.dists[indices])

    def row(self, i, z=None) -> "InstancePanel":
        return InstancePanel(self.sq_diffs[i], self.leaf_means[i],
                             None if self.values is None else self.values[i],
                             None if self.dists is None else self.dists[i], z=z)


class InstancePanel:
    """Attention inputs of a single query: one entry per tree."""

    def __init__(self, sq_diffs, leaf_means, values=None, dists=None, z=None):
        self.sq_diffs = sq_diffs
        self.leaf_means = leaf_means
        self.values = values
        self.dists = dists
        self.z = z
        self.distances = sq_diffs @ (z * z) if z is not None else sq_diffs.sum(axis=1)

    def __len__(self):
        return self.sq_diffs.shape[0]

    @property
    def is_classification(self):
        return self.dists is not None

    def weighted_distances(self, z=None):
        if z is None:
            return self.sq_diffs.sum(axis=1)
        z = np.asarray(z, dtype=float)
        return self.sq_diffs @ (z * z)


def panel_batch(forest: Forest, X) -> PanelBatch:
    X = as_feature_matrix(X, forest.n_features)
    leaf_ids = [tree.apply(X) for tree in forest.trees]
    leaf_means = np.stack([tree.leaf_means[ids] for tree, ids in zip(forest.trees, leaf_ids)], axis=1)
    sq_diffs = (X[:, None, :] - leaf_means) ** 2
    if forest.is_classification:
        dists = np.stack([tree.leaf_dists[ids] for tree, ids in zip(forest.trees, leaf_ids)], axis=1)
        return PanelBatch(sq_diffs, leaf_means, dists=dists)
    values = np.stack([tree.leaf_values[ids] for tree, ids in zip(forest.trees, leaf_ids)], axis=1)
    return PanelBatch(sq_diffs, leaf_means, values=values)


def panel(forest: Forest, x, z=None) -> InstancePanel:
    """Route one feature vector through every tree."""
    X = as_feature_matrix(x, forest.n_features)
    if X.shape[0] != 1:
        raise DatasetError("panel expects a single feature vector")
    z = check_feature_weights(z, forest.n_features)
    batch = panel_batch(forest, X)
    return batch.row(0, z=z)


def predict_baseline_batch(forest: Forest, X):
    """Plain tree average: predictions (regression) or (class distributions, labels)."""
    batch = panel_batch(forest, X)
    if forest.is_classification:
        probs = batch.dists.mean(axis=1)
        return probs, probs.argmax(axis=1)
    return batch.values.mean(axis=1)


def predict_baseline(forest: Forest, x):
    X = as_feature_matrix(x, forest.n_features)
    if X.shape[0] != 1:
        raise DatasetError("predict_baseline expects a single feature vector")
    if forest.is_classification:
        probs, labels = predict_baseline_batch(forest, X)
        return probs[0], int(labels[0])
    return float(predict_baseline_batch(forest, X)[0])
