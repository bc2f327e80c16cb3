"""
Datasets, CSV ingestion, benchmark generators and repeated random splits.

Usage:
    from abrf.data import load_csv, gen_friedman, SplitPlan, make_splits

    ds = load_csv("data/yacht.csv", target_column="resistance", task="regression")
    splits = make_splits(ds, SplitPlan(repetitions=100, train_fraction=0.8, seed=0))

Friedman benchmarks use the standard input ranges:
    Friedman 1: x in [0, 1]^10
    Friedman 2/3: x1 in [0, 100], x2 in [40*pi, 560*pi], x3 in [0, 1], x4 in [1, 11]
"""

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.datasets import (
    load_diabetes,
    make_friedman1,
    make_friedman2,
    make_friedman3,
    make_regression,
    make_sparse_uncorrelated,
)
from sklearn.model_selection import ShuffleSplit

from abrf.errors import DatasetError

TASKS = ("regression", "classification")


class Dataset:
    """Feature matrix plus regression targets or dense class ids (read-only)."""

    def __init__(self, features, targets, task="regression", n_classes=None,
                 feature_names=None, class_labels=None, name=None, target_name=None):
        if task not in TASKS:
            raise DatasetError(f"unknown task {task!r}, expected one of {TASKS}")

        features = np.array(features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DatasetError(f"features must be a non-empty n x m matrix, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("all feature values must be finite")

        if task == "classification":
            targets = np.array(targets)
            if not np.issubdtype(targets.dtype, np.integer):
                raise DatasetError("classification targets must be integer class ids")
            targets = targets.astype(np.int64)
            if n_classes is None:
                n_classes = int(targets.max()) + 1 if targets.size else 0
            if n_classes < 2:
                raise DatasetError(f"classification needs at least 2 classes, got {n_classes}")
            if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
                raise DatasetError(f"class ids must lie in [0, {n_classes})")
        else:
            targets = np.array(targets, dtype=float)
            if not np.all(np.isfinite(targets)):
                raise DatasetError("regression targets must be finite")
            n_classes = None

        if targets.shape != (features.shape[0],):
            raise DatasetError(
                f"targets length {targets.shape} does not match {features.shape[0]} rows")

        if feature_names is None:
            feature_names = [f"x{j + 1}" for j in range(features.shape[1])]
        feature_names = [str(f) for f in feature_names]
        if len(feature_names) != features.shape[1]:
            raise DatasetError("feature_names length does not match the number of columns")

        if task == "classification" and class_labels is None:
            class_labels = [str(c) for c in range(n_classes)]

        features.setflags(write=False)
        targets.setflags(write=False)
        self.features = features
        self.targets = targets
        self.task = task
        self.n_classes = n_classes
        self.feature_names = feature_names
        self.class_labels = list(class_labels) if class_labels is not None else None
        self.name = name
        self.target_name = target_name or "y"

    def __repr__(self):
        extra = f", C={self.n_classes}" if self.is_classification else ""
        return f"<Dataset {self.name or ''} n={self.n}, m={self.m}, task={self.task}{extra}>"

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[1]

    @property
    def is_classification(self):
        return self.task == "classification"

    def subset(self, indices) -> "Dataset":
        """Rows `indices` (duplicates allowed) as a new Dataset with the same schema."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.targets[indices], task=self.task,
                       n_classes=self.n_classes, feature_names=self.feature_names,
                       class_labels=self.class_labels, name=self.name,
                       target_name=self.target_name)

    def one_hot(self):
        """n x C indicator matrix of the class ids."""
        if not self.is_classification:
            raise DatasetError("one_hot is only defined for classification datasets")
        return np.eye(self.n_classes)[self.targets]

    def minmax_scaled(self) -> "Dataset":
        """Copy with every feature rescaled to [0, 1]; constant columns become 0."""
        lo = self.features.min(axis=0)
        span = self.features.max(axis=0) - lo
        span[span == 0] = 1.0
        return Dataset((self.features - lo) / span, self.targets, task=self.task,
                       n_classes=self.n_classes, feature_names=self.feature_names,
                       class_labels=self.class_labels, name=self.name,
                       target_name=self.target_name)

    def to_frame(self):
        frame = pd.DataFrame(np.asarray(self.features), columns=self.feature_names)
        if self.is_classification:
            frame[self.target_name] = [self.class_labels[c] for c in self.targets]
        else:
            frame[self.target_name] = np.asarray(self.targets)
        return frame


def _resolve_target(columns, target_column):
    if isinstance(target_column, (int, np.integer)) or (
            isinstance(target_column, str) and target_column.lstrip("-").isdigit()
            and target_column not in columns):
        index = int(target_column)
        if not -len(columns) <= index < len(columns):
            raise DatasetError(f"target column index {index} out of range for {len(columns)} columns")
        return columns[index]
    if target_column not in columns:
        raise DatasetError(f"target column {target_column!r} not found; columns are {list(columns)}",
                           column=target_column)
    return target_column


def _parse_numeric(frame, column):
    raw = frame[column]
    parsed = pd.to_numeric(raw, errors="coerce")
    bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        value = raw.iloc[row]
        # row numbers are 1-based data rows; the header is line 1 of the file
        raise DatasetError(
            f"unparseable cell {value!r} at row {row + 1} (line {row + 2}), column {column!r}",
            row=row + 1, column=column)
    return parsed.to_numpy(dtype=float)


def _is_numeric_column(frame, column):
    return not pd.to_numeric(frame[column], errors="coerce").isna().any()


def _feature_block(frame, column, one_hot):
    """(n x k values, names) for one input column; text columns expand to indicators."""
    if one_hot and not _is_numeric_column(frame, column):
        dummies = pd.get_dummies(frame[column].str.strip(), prefix=column, prefix_sep="=", dtype=float)
        return dummies.to_numpy(), [str(c) for c in dummies.columns]
    return _parse_numeric(frame, column)[:, None], [column]


def read_table(path, **options) -> pd.DataFrame:
    """pd.read_csv with unreadable or malformed files reported as DatasetError."""
    try:
        return pd.read_csv(path, **options)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path} is empty")
    except pd.errors.ParserError as exc:
        raise DatasetError(f"{path} is not a well-formed CSV file: {exc}")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"{path} is not UTF-8 text: {exc}")


def _reject_empty_cells(frame):
    """Short rows are padded with empty strings by read_csv; both count as missing."""
    empty = frame.fillna("").apply(lambda col: col.str.strip() == "").to_numpy()
    if empty.any():
        row, col = np.argwhere(empty)[0]
        column = frame.columns[col]
        raise DatasetError(
            f"missing value at row {row + 1} (line {row + 2}), column {column!r}",
            row=int(row) + 1, column=column)


def load_csv(path, target_column, task="regression", minmax=False, one_hot=False) -> Dataset:
    """
    Read a comma-separated file with a header row.

    Every non-target column must parse as a real number, unless one_hot is
    set, in which case text columns become 0/1 indicator columns named
    "column=value". Classification labels are mapped to 0..C-1 in order of
    first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    if task not in TASKS:
        raise DatasetError(f"unknown task {task!r}, expected one of {TASKS}")

    frame = read_table(path, dtype=str, keep_default_na=False, encoding="utf-8",
                       skipinitialspace=True)
    if frame.shape[0] < 1:
        raise DatasetError(f"{path} has a header but no data rows")
    frame.columns = [str(c).strip() for c in frame.columns]
    _reject_empty_cells(frame)
    target = _resolve_target(list(frame.columns), target_column)
    input_columns = [c for c in frame.columns if c != target]
    if not input_columns:
        raise DatasetError(f"{path} has no feature columns besides the target")

    blocks = [_feature_block(frame, c, one_hot) for c in input_columns]
    features = np.hstack([values for values, _ in blocks])
    feature_names = [name for _, names in blocks for name in names]

    if task == "classification":
        raw_labels = frame[target].str.strip()
        class_labels = list(pd.unique(raw_labels))
        if len(class_labels) < 2:
            raise DatasetError(
                f"classification target {target!r} has {len(class_labels)} distinct label(s); need at least 2",
                column=target)
        code = {label: i for i, label in enumerate(class_labels)}
        targets = raw_labels.map(code).to_numpy(dtype=np.int64)
        ds = Dataset(features, targets, task="classification", n_classes=len(class_labels),
                     feature_names=feature_names, class_labels=class_labels,
                     name=path.stem, target_name=target)
    else:
        targets = _parse_numeric(frame, target)
        ds = Dataset(features, targets, task="regression", feature_names=feature_names,
                     name=path.stem, target_name=target)

    return ds.minmax_scaled() if minmax else ds


def gen_friedman(variant, n, noise_sd=0.0, seed=0) -> Dataset:
    """Friedman 1 (m=10), 2 or 3 (m=4) benchmark with Normal(0, noise_sd^2) noise."""
    if n < 1:
        raise DatasetError("n must be at least 1")
    if noise_sd < 0:
        raise DatasetError("noise_sd must be non-negative")
    makers = {1: make_friedman1, 2: make_friedman2, 3: make_friedman3}
    if variant not in makers:
        raise DatasetError(f"Friedman variant must be 1, 2 or 3, got {variant!r}")
    if variant == 1:
        X, y = make_friedman1(n_samples=n, n_features=10, noise=noise_sd, random_state=seed)
    else:
        X, y = makers[variant](n_samples=n, noise=noise_sd, random_state=seed)
    return Dataset(X, y, name=f"friedman{variant}")


def gen_linear_regression(n=100, m=100, n_informative=10, noise_sd=0.0, seed=0) -> Dataset:
    """Random linear model over standard-normal features (scikit-learn's make_regression)."""
    if n < 1 or m < 1:
        raise DatasetError("n and m must be at least 1")
    if not 0 <= n_informative <= m:
        raise DatasetError("n_informative must lie in [0, m]")
    X, y = make_regression(n_samples=n, n_features=m, n_informative=n_informative,
                           noise=noise_sd, random_state=seed)
    return Dataset(X, y, name="regression")


def gen_sparse_uncorrelated(n=100, m=10, seed=0, noise_sd=1.0) -> Dataset:
    """
    y = x1 + 2*x2 - 2*x3 - 1.5*x4 + noise over standard-normal features.

    scikit-learn's make_sparse_uncorrelated draws unit-variance noise; it is
    rescaled here to noise_sd around the same noise-free response.
    """
    if n < 1 or m < 4:
        raise DatasetError("sparse-uncorrelated needs n >= 1 and m >= 4")
    if noise_sd < 0:
        raise DatasetError("noise_sd must be non-negative")
    X, y = make_sparse_uncorrelated(n_samples=n, n_features=m, random_state=seed)
    clean = X[:, 0] + 2 * X[:, 1] - 2 * X[:, 2] - 1.5 * X[:, 3]
    return Dataset(X, clean + noise_sd * (y - clean), name="sparse")


GENERATORS = {
    "friedman1": lambda n, noise_sd, seed: gen_friedman(1, n, noise_sd, seed),
    "friedman2": lambda n, noise_sd, seed: gen_friedman(2, n, noise_sd, seed),
    "friedman3": lambda n, noise_sd, seed: gen_friedman(3, n, noise_sd, seed),
    "regression": lambda n, noise_sd, seed, m=100, n_informative=10: gen_linear_regression(
        n, m, n_informative, noise_sd, seed),
    "sparse": lambda n, noise_sd, seed, m=10: gen_sparse_uncorrelated(n, m, seed, noise_sd),
}

GENERATOR_OPTIONS = {
    "friedman1": (),
    "friedman2": (),
    "friedman3": (),
    "regression": ("m", "n_informative"),
    "sparse": ("m",),
}


def generate(kind, n=100, noise_sd=0.0, seed=0, **options) -> Dataset:
    """Dispatch to one of GENERATORS by name; options a generator does not take are rejected."""
    if kind not in GENERATORS:
        raise DatasetError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    unknown = sorted(set(options) - set(GENERATOR_OPTIONS[kind]))
    if unknown:
        accepted = ", ".join(GENERATOR_OPTIONS[kind]) or "none"
        raise DatasetError(f"generator {kind!r} does not take {unknown}; extra options it accepts: {accepted}")
    return GENERATORS[kind](n=n, noise_sd=noise_sd, seed=seed, **options)


def load_diabetes_data() -> Dataset:
    """The 442-patient diabetes progression data bundled with scikit-learn."""
    bunch = load_diabetes()
    return Dataset(bunch.data, bunch.target, feature_names=bunch.feature_names,
                   name="diabetes", target_name="progression")


class SplitPlan:
    """Repeated random train/test splitting."""

    def __init__(self, repetitions=100, train_fraction=0.8, seed=0):
        if int(repetitions) < 1:
            raise DatasetError("repetitions must be a positive integer")
        if not 0.0 < float(train_fraction) < 1.0:
            raise DatasetError("train_fraction must lie in (0, 1)")
        if int(seed) < 0:
            raise DatasetError("seed must be a non-negative integer")
        self.repetitions = int(repetitions)
        self.train_fraction = float(train_fraction)
        self.seed = int(seed)

    def train_size(self, n):
        return int(np.floor(self.train_fraction * n + 0.5))

    def validate(self, n):
        n_train = self.train_size(n)
        if n_train < 1 or n - n_train < 1:
            raise DatasetError(
                f"train_fraction {self.train_fraction} leaves an empty train or test side for n={n}")

    def to_dict(self):
        return {"repetitions": self.repetitions, "train_fraction": self.train_fraction,
                "seed": self.seed}


def make_splits(ds: Dataset, plan: SplitPlan) -> List[Tuple[np.ndarray, np.ndarray]]:
    """One (train_indices, test_indices) pair per repetition, each sorted ascending."""
    plan.validate(ds.n)
    n_train = plan.train_size(ds.n)
    splitter = ShuffleSplit(n_splits=plan.repetitions, train_size=n_train,
                            test_size=ds.n - n_train, random_state=plan.seed)
    return [(np.sort(train), np.sort(test))
            for train, test in splitter.split(np.zeros((ds.n, 1)))]


def inner_split(n, fraction, seed) -> Tuple[np.ndarray, np.ndarray]:
    """Single train/validation split of range(n) used for hyperparameter selection."""
    plan = SplitPlan(repetitions=1, train_fraction=fraction, seed=seed)
    plan.validate(n)
    n_train = plan.train_size(n)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def as_feature_matrix(X, m: Optional[int] = None):
    """Validate query rows at the API boundary: 2-D, finite, m columns."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if m is not None and X.shape[1] != m:
        raise DatasetError(f"expected {m} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DatasetError("feature vectors must be finite (NaN or inf found)")
    return X
