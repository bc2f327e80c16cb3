"""
Tests for the repeated train/test evaluation and its report files.

Runs are kept tiny: a handful of trees, two repetitions, 2 x 2 grids.
"""

import json

import numpy as np
import pandas as pd
import pytest

from abrf import console
from abrf.errors import ConfigError
from abrf.experiment import (
    ExperimentConfig,
    cmd_grid,
    cmd_run,
    comparison_models,
    condition_label,
    load_dataset,
    parse_condition,
    report_rows,
    run_experiment,
    run_grid,
)
from abrf.tree import GrowthCondition

FRIEDMAN = {"kind": "friedman1", "n": 40, "noise_sd": 0.5}


def tiny(**overrides):
    settings = dict(generator=FRIEDMAN, model="abrf1-qp", n_trees=3, repetitions=2,
                    eps_grid=[0.0, 1.0], tau_grid=[1.0, 10.0], workers=1, minmax=True, seed=4)
    settings.update(overrides)
    return ExperimentConfig(**settings)


@pytest.fixture(autouse=True)
def quiet():
    console.set_verbose(False)
    yield
    console.set_verbose(True)


@pytest.fixture
def blobs_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1, (20, 2)), rng.normal(3, 1, (20, 2))])
    frame = pd.DataFrame(X, columns=["a", "b"])
    frame["label"] = ["no"] * 20 + ["yes"] * 20
    path = tmp_path / "blobs.csv"
    frame.to_csv(path, index=False)
    return path


def test_parse_condition_forms():
    assert parse_condition(1) == GrowthCondition.max_depth(2)
    assert parse_condition("2") == GrowthCondition.min_leaf(10)
    assert parse_condition("max_depth=3") == GrowthCondition.max_depth(3)
    assert parse_condition({"kind": "min_leaf", "value": 4}) == GrowthCondition.min_leaf(4)
    with pytest.raises(ConfigError):
        parse_condition("deep")
    assert condition_label(GrowthCondition.max_depth(2)) == "1"
    assert condition_label(GrowthCondition.min_leaf(3)) == "min_leaf=3"


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(model="abrf1-qp")
    with pytest.raises(ConfigError):
        tiny(colour="blue")
    with pytest.raises(ConfigError):
        tiny(repetitions=0)
    with pytest.raises(ConfigError):
        tiny(train_fraction=1.0)
    with pytest.raises(ConfigError):
        tiny(eps_grid=[1.5])
    with pytest.raises(ConfigError):
        tiny(softmax_sign=0)
    with pytest.raises(ConfigError):
        tiny(model="gbm")
    with pytest.raises(ConfigError):
        tiny(inner_train_fraction=1.0)
    with pytest.raises(ConfigError):
        tiny(model="abrf3", train_params=["w", "q"])
    with pytest.raises(ConfigError):
        tiny(model="abrf3", train_params=[])
    assert tiny(model="abrf3", train_params=["w"]).grad_config().which_params == ("w",)


def test_config_from_file_with_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"generator": FRIEDMAN, "n_trees": 7, "repetitions": 3}))
    cfg = ExperimentConfig.from_file(path, repetitions=5, model=None)
    assert cfg.n_trees == 7 and cfg.repetitions == 5
    assert cfg.model == "abrf1-qp"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "bad.json")


def test_default_grids_follow_task():
    cfg = ExperimentConfig(generator=FRIEDMAN)
    eps, tau = cfg.resolved_grids("regression")
    assert len(eps) == 10 and eps[0] == 0.0 and eps[-1] == 1.0
    eps, _ = cfg.resolved_grids("classification")
    assert eps == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert tau == [0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0]


def test_comparison_models():
    assert comparison_models("abrf3") == ["baseline", "softmax", "abrf3"]
    assert comparison_models("softmax") == ["baseline", "softmax"]
    assert comparison_models("baseline") == ["baseline"]


def test_lp_model_rejected_for_classification(blobs_csv):
    cfg = ExperimentConfig(dataset=str(blobs_csv), task="classification", model="abrf1-lp")
    with pytest.raises(ConfigError):
        load_dataset(cfg)


def test_run_experiment_regression():
    report = run_experiment(tiny())
    assert [m["model"] for m in report["models"]] == ["baseline", "softmax", "abrf1-qp"]
    for model in report["models"]:
        assert model["metric"] == "r2"
        assert model["repetitions"] == 2
        assert len(model["values"]) == 2
        assert "mae_mean" in model
    assert len(report["grids"]["abrf1-qp"]) == 4
    assert len(report["grids"]["softmax"]) == 2
    baseline, softmax, abrf1 = report["models"]
    assert baseline["eps_opt"] is None and baseline["tau_opt"] is None
    assert softmax["eps_opt"] is None and softmax["tau_opt"] in (1.0, 10.0)
    assert abrf1["eps_opt"] in (0.0, 1.0)
    assert report["dataset"]["task"] == "regression"


def test_report_rows_layout():
    rows = report_rows(run_experiment(tiny()))
    assert [r["model"] for r in rows] == ["baseline", "softmax", "abrf1-qp"]
    assert rows[0]["condition"] == "2"
    assert {"r2_mean", "r2_std", "mae_mean", "eps_opt", "eps_opt_test"} <= set(rows[2])


def test_run_experiment_classification(blobs_csv):
    cfg = ExperimentConfig(dataset=str(blobs_csv), task="classification", model="abrf3",
                           n_trees=3, repetitions=2, eps_grid=[0.0, 1.0], tau_grid=[1.0],
                           max_iters=30, workers=1)
    report = run_experiment(cfg)
    assert [m["model"] for m in report["models"]] == ["baseline", "softmax", "abrf3"]
    for model in report["models"]:
        assert model["metric"] == "f1"
        assert all(0.0 <= v <= 1.0 for v in model["values"])
        assert "mae_mean" not in model
    assert report["models"][2]["tau_opt"] is None
    assert report["dataset"]["n_classes"] == 2


def test_cmd_run_is_reproducible(tmp_path):
    first = cmd_run(tiny(output=tmp_path / "a"))
    second = cmd_run(tiny(output=tmp_path / "b", workers=2))
    assert first["csv"].read_bytes() == second["csv"].read_bytes()
    a = json.loads(first["json"].read_text())
    b = json.loads(second["json"].read_text())
    assert a["models"] == b["models"]
    assert a["grids"] == b["grids"]


def test_cmd_grid_rows(tmp_path):
    path = cmd_grid(tiny(output=tmp_path / "surface"))
    frame = pd.read_csv(path)
    assert len(frame) == 5
    assert frame["model"].tolist() == ["abrf1-qp"] * 4 + ["baseline"]
    assert frame["epsilon"].iloc[:4].tolist() == [0.0, 0.0, 1.0, 1.0]
    assert frame["tau"].iloc[:4].tolist() == [1.0, 10.0, 1.0, 10.0]
    assert frame["failures"].sum() == 0


def test_grid_for_baseline_has_one_row():
    rows = run_grid(tiny(model="baseline"))
    assert len(rows) == 1
    assert rows[0]["model"] == "baseline"


def test_baseline_report_has_only_rf():
    report = run_experiment(tiny(model="baseline"))
    assert [m["model"] for m in report["models"]] == ["baseline"]
    assert report["grids"] == {}
    assert report["models"][0]["eps_opt"] is None
