"""
Decision trees whose leaves keep the statistics attention needs.

Each leaf records the (multiset of) training row indices that reached it,
their mean feature vector A, mean target B (regression) and class
frequency vector p (classification).

Splitters:
    cart - best (feature, midpoint threshold) over max_features random features
    ert  - one uniform random threshold per candidate feature, best of those

Growth conditions:
    MaxDepth(d) - no leaf deeper than d (root has depth 0)
    MinLeaf(q)  - a split is admissible only if both children keep >= q rows

Ties between equally good splits go to the lowest feature index, then the
lowest threshold.
"""

import math
from typing import List, Optional

import numpy as np

from abrf.data import Dataset, as_feature_matrix
from abrf.errors import ConfigError, DatasetError

FORMAT_VERSION = 1
SPLITTERS = ("cart", "ert")


class GrowthCondition:
    """MaxDepth(d) or MinLeaf(q)."""

    KINDS = ("max_depth", "min_leaf")

    def __init__(self, kind, value):
        if kind not in self.KINDS:
            raise ConfigError(f"growth condition kind must be one of {self.KINDS}, got {kind!r}")
        if int(value) < 1:
            raise ConfigError(f"{kind} must be a positive integer, got {value!r}")
        self.kind = kind
        self.value = int(value)

    @classmethod
    def max_depth(cls, d):
        return cls("max_depth", d)

    @classmethod
    def min_leaf(cls, q):
        return cls("min_leaf", q)

    @classmethod
    def from_number(cls, number):
        """Condition 1: depth at most 2. Condition 2: at least 10 rows per leaf."""
        if int(number) == 1:
            return cls.max_depth(2)
        if int(number) == 2:
            return cls.min_leaf(10)
        raise ConfigError(f"condition must be 1 or 2, got {number!r}")

    @property
    def leaf_minimum(self):
        return self.value if self.kind == "min_leaf" else 1

    def __eq__(self, other):
        return isinstance(other, GrowthCondition) and (self.kind, self.value) == (other.kind, other.value)

    def __repr__(self):
        return f"GrowthCondition({self.kind}={self.value})"

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], data["value"])


class LeafStats:
    """Members of one leaf and the means computed from them."""

    def __init__(self, member_indices, mean_vector, mean_target=None, class_dist=None, depth=0):
        self.member_indices = np.asarray(member_indices, dtype=np.int64)
        self.mean_vector = np.asarray(mean_vector, dtype=float)
        self.mean_target = None if mean_target is None else float(mean_target)
        self.class_dist = None if class_dist is None else np.asarray(class_dist, dtype=float)
        self.depth = int(depth)

    @property
    def size(self):
        return len(self.member_indices)

    def __repr__(self):
        return f"<LeafStats size={self.size} depth={self.depth}>"

    @classmethod
    def from_members(cls, ds: Dataset, members, depth):
        members = np.sort(np.asarray(members, dtype=np.int64))
        mean_vector = ds.features[members].mean(axis=0)
        if ds.is_classification:
            counts = np.bincount(ds.targets[members], minlength=ds.n_classes)
            return cls(members, mean_vector, class_dist=counts / len(members), depth=depth)
        return cls(members, mean_vector, mean_target=ds.targets[members].mean(), depth=depth)


class Tree:
    """
    Array-encoded binary tree.

    Node i is internal when feature[i] >= 0 (children left[i], right[i];
    go left iff x[feature[i]] <= threshold[i]) and a leaf otherwise, with
    leaf_of_node[i] indexing `leaves`.
    """

    def __init__(self, feature, threshold, left, right, leaf_of_node, leaves: List[LeafStats],
                 mode, splitter, n_features, n_classes=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf_of_node = np.asarray(leaf_of_node, dtype=np.int64)
        self.leaves = list(leaves)
        self.mode = mode
        self.splitter = splitter
        self.n_features = int(n_features)
        self.n_classes = None if n_classes is None else int(n_classes)

        # stacked leaf statistics for batch lookups
        self.leaf_means = np.vstack([leaf.mean_vector for leaf in self.leaves])
        if mode == "classification":
            self.leaf_dists = np.vstack([leaf.class_dist for leaf in self.leaves])
            self.leaf_values = None
        else:
            self.leaf_values = np.array([leaf.mean_target for leaf in self.leaves])
            self.leaf_dists = None

    def __repr__(self):
        return f"<Tree {self.splitter} {self.mode}: {self.n_nodes} nodes, {len(self.leaves)} leaves>"

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        return max(leaf.depth for leaf in self.leaves)

    def leaf_depths(self):
        return np.array([leaf.depth for leaf in self.leaves])

    def leaf_sizes(self):
        return np.array([leaf.size for leaf in self.leaves])

    def apply(self, X):
        """Leaf index for every row of X (already validated)."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            at = node[active]
            go_left = X[active, self.feature[at]] <= self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])
            active = active[self.feature[node[active]] >= 0]
        return self.leaf_of_node[node]

    def to_dict(self):
        leaves = {
            "member_indices": [leaf.member_indices.tolist() for leaf in self.leaves],
            "mean_vector": [leaf.mean_vector.tolist() for leaf in self.leaves],
            "depth": [leaf.depth for leaf in self.leaves],
        }
        if self.mode == "classification":
            leaves["class_dist"] = [leaf.class_dist.tolist() for leaf in self.leaves]
        else:
            leaves["mean_target"] = [leaf.mean_target for leaf in self.leaves]
        return {
            "format_version": FORMAT_VERSION,
            "mode": self.mode,
            "splitter": self.splitter,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "nodes": {
                "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "leaf": self.leaf_of_node.tolist(),
            },
            "leaves": leaves,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported tree format version {data.get('format_version')!r}")
        nodes, raw = data["nodes"], data["leaves"]
        classification = data["mode"] == "classification"
        leaves = []
        for i, members in enumerate(raw["member_indices"]):
            leaves.append(LeafStats(
                members, raw["mean_vector"][i],
                mean_target=None if classification else raw["mean_target"][i],
                class_dist=raw["class_dist"][i] if classification else None,
                depth=raw["depth"][i]))
        return cls(nodes["feature"], nodes["threshold"], nodes["left"], nodes["right"],
                   nodes["leaf"], leaves, data["mode"], data["splitter"],
                   data["n_features"], data.get("n_classes"))


def default_max_features(m, task):
    """ceil(m/3) for regression, ceil(sqrt(m)) for classification."""
    if task == "classification":
        return max(1, math.ceil(math.sqrt(m)))
    return max(1, math.ceil(m / 3))


def _scores_regression(y_sorted):
    """Summed child SSE for every 'first i+1 rows go left' split of sorted targets."""
    y = y_sorted - y_sorted.mean()
    n = len(y)
    s1, s2 = np.cumsum(y), np.cumsum(y * y)
    n_left = np.arange(1, n)
    n_right = n - n_left
    sse_left = s2[:-1] - s1[:-1] ** 2 / n_left
    sse_right = (s2[-1] - s2[:-1]) - (s1[-1] - s1[:-1]) ** 2 / n_right
    return sse_left + sse_right


def _scores_classification(onehot_sorted):
    """Summed size-weighted child Gini impurity for every prefix split."""
    n = onehot_sorted.shape[0]
    counts = np.cumsum(onehot_sorted, axis=0)
    left, total = counts[:-1], counts[-1]
    right = total - left
    n_left = np.arange(1, n)
    n_right = n - n_left
    return (n_left - (left ** 2).sum(axis=1) / n_left) + (n_right - (right ** 2).sum(axis=1) / n_right)


def _score_partition(ds, members, go_left):
    if ds.is_classification:
        onehot = np.eye(ds.n_classes)[ds.targets[members]]
        score = 0.0
        for part in (onehot[go_left], onehot[~go_left]):
            size = part.shape[0]
            score += size - (part.sum(axis=0) ** 2).sum() / size
        return score
    y = ds.targets[members]
    return float(((y[go_left] - y[go_left].mean()) ** 2).sum()
                 + ((y[~go_left] - y[~go_left].mean()) ** 2).sum())


def _best_cart_split(ds, members, feature, min_leaf):
    x = ds.features[members, feature]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if ds.is_classification:
        scores = _scores_classification(np.eye(ds.n_classes)[ds.targets[members][order]])
    else:
        scores = _scores_regression(ds.targets[members][order])

    n = len(xs)
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    candidates = np.flatnonzero(valid)
    best = candidates[np.argmin(scores[candidates])]
    threshold = 0.5 * (xs[best] + xs[best + 1])
    if not xs[best] <= threshold < xs[best + 1]:
        threshold = xs[best]
    return float(scores[best]), float(threshold)


def _random_ert_split(ds, members, feature, min_leaf, rng):
    x = ds.features[members, feature]
    lo, hi = x.min(), x.max()
    if lo == hi:
        return None
    threshold = float(rng.uniform(lo, hi))
    go_left = x <= threshold
    n_left = int(go_left.sum())
    if n_left < min_leaf or len(x) - n_left < min_leaf or n_left == 0 or n_left == len(x):
        return None
    return _score_partition(ds, members, go_left), threshold


def _is_pure(ds, members):
    values = ds.targets[members]
    return bool(np.all(values == values[0]))


def fit_tree(ds: Dataset, sample_indices, condition: GrowthCondition, splitter="cart",
             max_features: Optional[int] = None, seed=0) -> Tree:
    """Grow one tree on the rows `sample_indices` (a multiset) of `ds`."""
    members = np.asarray(sample_indices, dtype=np.int64)
    if members.size == 0:
        raise DatasetError("cannot fit a tree on an empty sample")
    if splitter not in SPLITTERS:
        raise ConfigError(f"splitter must be one of {SPLITTERS}, got {splitter!r}")
    if max_features is None:
        max_features = default_max_features(ds.m, ds.task)
    if not 1 <= int(max_features) <= ds.m:
        raise ConfigError(f"max_features must lie in [1, {ds.m}], got {max_features}")
    max_features = int(max_features)

    rng = np.random.default_rng(seed)
    min_leaf = condition.leaf_minimum
    max_depth = condition.value if condition.kind == "max_depth" else None

    feature, threshold, left, right, leaf_of_node = [], [], [], [], []
    leaves = []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_of_node.append(-1)
        return len(feature) - 1

    # depth-first, left child first
    stack = [(new_node(), members, 0)]
    while stack:
        node, rows, depth = stack.pop()

        split = None
        can_split = (
            (max_depth is None or depth < max_depth)
            and len(rows) >= 2 * min_leaf
            and not _is_pure(ds, rows)
        )
        if can_split:
            candidates = np.sort(rng.choice(ds.m, size=max_features, replace=False))
            for f in candidates:
                if splitter == "cart":
                    found = _best_cart_split(ds, rows, f, min_leaf)
                else:
                    found = _random_ert_split(ds, rows, f, min_leaf, rng)
                if found is None:
                    continue
                score, thr = found
                # candidates are sorted, so ties keep the lowest feature index
                if split is None or score < split[0]:
                    split = (score, int(f), thr)

        if split is None:
            leaf_of_node[node] = len(leaves)
            leaves.append(LeafStats.from_members(ds, rows, depth))
            continue

        _, f, thr = split
        go_left = ds.features[rows, f] <= thr
        left_id, right_id = new_node(), new_node()
        feature[node], threshold[node] = f, thr
        left[node], right[node] = left_id, right_id
        stack.append((right_id, rows[~go_left], depth + 1))
        stack.append((left_id, rows[go_left], depth + 1))

    return Tree(feature, threshold, left, right, leaf_of_node, leaves,
                ds.task, splitter, ds.m, ds.n_classes)


def route(tree: Tree, x) -> LeafStats:
    """Leaf reached by the single feature vector x."""
    X = as_feature_matrix(x, tree.n_features)
    if X.shape[0] != 1:
        raise DatasetError("route expects a single feature vector")
    return tree.leaves[int(tree.apply(X)[0])]
