"""
Tests for dataset loading, the benchmark generators and repeated splits.
"""

import numpy as np
import pytest

from abrf.data import (
    Dataset,
    SplitPlan,
    as_feature_matrix,
    gen_friedman,
    gen_linear_regression,
    gen_sparse_uncorrelated,
    generate,
    inner_split,
    load_csv,
    make_splits,
)
from abrf.errors import DatasetError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_regression(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,2,5\n3,4,6\n5,6,7\n"), "y")
    assert (ds.n, ds.m) == (3, 2)
    assert ds.feature_names == ["a", "b"]
    np.testing.assert_array_equal(ds.targets, [5.0, 6.0, 7.0])
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])


def test_load_csv_target_by_index(tmp_path):
    ds = load_csv(write(tmp_path, "y,a,b\n5,1,2\n6,3,4\n"), 0)
    assert ds.feature_names == ["a", "b"]
    np.testing.assert_array_equal(ds.targets, [5.0, 6.0])


def test_load_csv_classification_first_appearance_order(tmp_path):
    ds = load_csv(write(tmp_path, "a,label\n1,dog\n2,cat\n3,dog\n4,bird\n"), "label", task="classification")
    assert ds.class_labels == ["dog", "cat", "bird"]
    assert ds.n_classes == 3
    np.testing.assert_array_equal(ds.targets, [0, 1, 0, 2])


def test_load_csv_bad_cell_names_row_and_column(tmp_path):
    path = write(tmp_path, "a,b,y\n1,2,5\n3,abc,6\n")
    with pytest.raises(DatasetError) as info:
        load_csv(path, "y")
    assert info.value.row == 2
    assert info.value.column == "b"
    assert "'abc'" in str(info.value)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "nope.csv", "y")


def test_load_csv_single_class_rejected(tmp_path):
    with pytest.raises(DatasetError, match="at least 2"):
        load_csv(write(tmp_path, "a,c\n1,x\n2,x\n"), "c", task="classification")


def test_load_csv_unknown_target(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(write(tmp_path, "a,b\n1,2\n"), "y")


def test_load_csv_one_hot_text_columns(tmp_path):
    path = write(tmp_path, "tl,tm,class\nx,o,positive\no,b,negative\nx,x,positive\n")
    ds = load_csv(path, "class", task="classification", one_hot=True)
    assert ds.feature_names == ["tl=o", "tl=x", "tm=b", "tm=o", "tm=x"]
    np.testing.assert_array_equal(ds.features[0], [0, 1, 0, 1, 0])
    assert ds.features.sum(axis=1).tolist() == [2.0, 2.0, 2.0]


def test_load_csv_minmax(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,y\n1,5,0\n3,5,1\n5,5,2\n"), "y", minmax=True)
    np.testing.assert_allclose(ds.features[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(ds.features[:, 1], [0.0, 0.0, 0.0])


def test_dataset_invariants():
    with pytest.raises(DatasetError):
        Dataset([[1.0, np.nan]], [1.0])
    with pytest.raises(DatasetError):
        Dataset([[1.0], [2.0]], [0, 0], task="classification", n_classes=1)
    with pytest.raises(DatasetError):
        Dataset([[1.0], [2.0]], [0, 3], task="classification", n_classes=2)
    with pytest.raises(DatasetError):
        Dataset([[1.0], [2.0]], [1.0])


def test_dataset_is_read_only():
    ds = Dataset([[1.0], [2.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 5.0


def test_one_hot_rows():
    ds = Dataset([[0.0], [1.0], [2.0]], [2, 0, 1], task="classification", n_classes=3)
    np.testing.assert_array_equal(ds.one_hot(), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_friedman1_formula():
    ds = gen_friedman(1, n=100, noise_sd=0.0, seed=3)
    assert (ds.n, ds.m) == (100, 10)
    X = ds.features
    expected = (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
                + 10 * X[:, 3] + 5 * X[:, 4])
    np.testing.assert_allclose(ds.targets, expected, atol=1e-9)
    assert X.min() >= 0.0 and X.max() <= 1.0


def test_friedman1_hand_value():
    x = np.full(5, 0.5)
    y = 10 * np.sin(np.pi * x[0] * x[1]) + 20 * (x[2] - 0.5) ** 2 + 10 * x[3] + 5 * x[4]
    assert y == pytest.approx(14.5711, abs=1e-4)


def test_friedman2_and_3_formulas_and_ranges():
    for variant in (2, 3):
        ds = gen_friedman(variant, n=200, noise_sd=0.0, seed=1)
        X = ds.features
        assert ds.m == 4
        inner = X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])
        if variant == 2:
            expected = np.sqrt(X[:, 0] ** 2 + inner ** 2)
        else:
            expected = np.arctan(inner / X[:, 0])
        np.testing.assert_allclose(ds.targets, expected, rtol=1e-9, atol=1e-9)
        assert X[:, 0].min() >= 0 and X[:, 0].max() <= 100
        assert X[:, 1].min() >= 40 * np.pi and X[:, 1].max() <= 560 * np.pi
        assert X[:, 2].min() >= 0 and X[:, 2].max() <= 1
        assert X[:, 3].min() >= 1 and X[:, 3].max() <= 11


def test_generators_are_deterministic():
    a = gen_friedman(1, n=50, noise_sd=1.0, seed=7)
    b = gen_friedman(1, n=50, noise_sd=1.0, seed=7)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)
    c = gen_sparse_uncorrelated(n=20, seed=4)
    d = gen_sparse_uncorrelated(n=20, seed=4)
    np.testing.assert_array_equal(c.targets, d.targets)


def test_friedman_rejects_bad_input():
    with pytest.raises(DatasetError):
        gen_friedman(4, n=10)
    with pytest.raises(DatasetError):
        gen_friedman(1, n=0)
    with pytest.raises(DatasetError):
        gen_friedman(1, n=10, noise_sd=-1.0)


def test_sparse_uncorrelated_formula():
    ds = gen_sparse_uncorrelated(n=30, m=10, seed=2, noise_sd=0.0)
    X = ds.features
    np.testing.assert_allclose(ds.targets, X[:, 0] + 2 * X[:, 1] - 2 * X[:, 2] - 1.5 * X[:, 3])
    x = np.array([1.0, 1.0, 1.0, 1.0])
    assert x[0] + 2 * x[1] - 2 * x[2] - 1.5 * x[3] == pytest.approx(-0.5)


def test_linear_regression_dims():
    ds = gen_linear_regression(n=100, m=100, seed=0)
    assert (ds.n, ds.m) == (100, 100)
    assert generate("regression", n=100, seed=0).m == 100


def test_generate_unknown_kind():
    with pytest.raises(DatasetError, match="unknown generator"):
        generate("friedman9")


def test_make_splits_partition():
    ds = Dataset(np.arange(10.0).reshape(-1, 1), np.arange(10.0))
    splits = make_splits(ds, SplitPlan(repetitions=5, train_fraction=0.8, seed=0))
    assert len(splits) == 5
    for train, test in splits:
        assert len(train) == 8 and len(test) == 2
        assert set(train).isdisjoint(test)
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(10))


def test_make_splits_deterministic_and_count():
    ds = gen_friedman(1, n=40, seed=0)
    plan = SplitPlan(repetitions=100, train_fraction=0.8, seed=11)
    first, second = make_splits(ds, plan), make_splits(ds, plan)
    assert len(first) == 100
    for (a, b), (c, d) in zip(first, second):
        np.testing.assert_array_equal(a, c)
        np.testing.assert_array_equal(b, d)


def test_split_plan_rejects_empty_side():
    ds = Dataset([[1.0], [2.0]], [1.0, 2.0])
    with pytest.raises(DatasetError):
        make_splits(ds, SplitPlan(repetitions=1, train_fraction=0.9, seed=0))
    with pytest.raises(DatasetError):
        SplitPlan(train_fraction=1.0)


def test_inner_split_partitions():
    fit_rows, val_rows = inner_split(20, 0.8, seed=5)
    assert len(fit_rows) == 16 and len(val_rows) == 4
    assert sorted(np.concatenate([fit_rows, val_rows]).tolist()) == list(range(20))


def test_as_feature_matrix_rejects_nan_and_width():
    with pytest.raises(DatasetError):
        as_feature_matrix([1.0, np.nan], 2)
    with pytest.raises(DatasetError, match="expected 3 features"):
        as_feature_matrix([[1.0, 2.0]], 3)


def test_load_csv_short_row_names_missing_label(tmp_path):
    path = write(tmp_path, "a,y\n1,x\n2,y\n3\n4,x\n")
    with pytest.raises(DatasetError, match="missing value") as info:
        load_csv(path, "y", task="classification")
    assert info.value.row == 3
    assert info.value.column == "y"


def test_load_csv_blank_label_rejected(tmp_path):
    path = write(tmp_path, "a,y\n1,x\n2, \n3,y\n")
    with pytest.raises(DatasetError) as info:
        load_csv(path, "y", task="classification")
    assert info.value.row == 2


def test_load_csv_malformed_files(tmp_path):
    with pytest.raises(DatasetError, match="empty"):
        load_csv(write(tmp_path, "", name="empty.csv"), "y")
    with pytest.raises(DatasetError, match="well-formed"):
        load_csv(write(tmp_path, "a,y\n1,2\n3,4\n5,6,7\n", name="long.csv"), "y")
    path = tmp_path / "latin1.csv"
    path.write_bytes("a,y\n1,caf\xe9\n2,bar\n".encode("latin-1"))
    with pytest.raises(DatasetError, match="UTF-8"):
        load_csv(path, "y", task="classification")


def test_generate_rejects_options_a_generator_does_not_take():
    with pytest.raises(DatasetError, match="does not take"):
        generate("friedman1", n=10, m=5)
    with pytest.raises(DatasetError, match="does not take"):
        generate("regression", n=10, depth=3)
    assert generate("sparse", n=20, m=6).m == 6
    assert generate("regression", n=20, m=7, n_informative=2).m == 7


def test_sparse_uncorrelated_matches_scikit_learn_at_unit_noise():
    from sklearn.datasets import make_sparse_uncorrelated

    X, y = make_sparse_uncorrelated(n_samples=50, n_features=8, random_state=3)
    ds = gen_sparse_uncorrelated(n=50, m=8, seed=3, noise_sd=1.0)
    np.testing.assert_array_equal(ds.features, X)
    np.testing.assert_allclose(ds.targets, y, atol=1e-12)

    louder = gen_sparse_uncorrelated(n=50, m=8, seed=3, noise_sd=2.0)
    clean = X[:, 0] + 2 * X[:, 1] - 2 * X[:, 2] - 1.5 * X[:, 3]
    np.testing.assert_allclose(louder.targets - clean, 2.0 * (y - clean), atol=1e-12)
