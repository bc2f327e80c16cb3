"""
Repeated train/test evaluation of attention models.

Per repetition:
    1. split the data (train_fraction / rest)
    2. fit the forest on the training side
    3. for every grid cell, train weights on an inner_train_fraction share of
       the training side and score them on the remaining rows (validation
       score), then retrain on the whole training side and score on the
       test side (test score)
    4. the cell with the best validation score is the repetition's choice

Reports carry the RF baseline, the Softmax comparator and the requested
model, with both the validation-selected (eps_opt, tau_opt) and the cell
with the best mean test score.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from abrf import config, console
from abrf.attention import MODELS
from abrf.catalog import DatasetCatalog
from abrf.data import TASKS, Dataset, SplitPlan, generate, inner_split, load_csv, make_splits
from abrf.errors import ConfigError, MetricError, SolverError
from abrf.forest import ENSEMBLES, ForestConfig, fit_forest, panel_batch
from abrf.metrics import F1_AVERAGES, EvalReport, f1, mae, r2
from abrf.parallel import gather_processes
from abrf.solver import (
    GRADIENT_PARAMS,
    GradConfig,
    check_grids,
    check_model,
    fit_attention,
    grid_cells,
    predict_panel,
)
from abrf.tree import GrowthCondition

DEFAULTS = {
    "dataset": None,
    "target": -1,
    "task": None,
    "generator": None,
    "one_hot": False,
    "data_dir": None,
    "minmax": False,
    "ensemble": "rf",
    "condition": 2,
    "model": "abrf1-qp",
    "n_trees": config.DEFAULT_N_TREES,
    "max_features": None,
    "eps_grid": None,
    "tau_grid": None,
    "repetitions": 100,
    "train_fraction": 0.8,
    "inner_train_fraction": 0.8,
    "seed": config.DEFAULT_SEED,
    "softmax_sign": -1,
    "f1_average": "macro",
    "learning_rate": config.GRAD_LEARNING_RATE,
    "max_iters": config.GRAD_MAX_ITERS,
    "tolerance": config.GRAD_TOLERANCE,
    "train_params": None,
    "output": None,
    "workers": config.WORKERS,
}


def parse_condition(value) -> GrowthCondition:
    """1, 2, {"kind": ..., "value": ...} or "max_depth=3" / "min_leaf=5"."""
    if isinstance(value, GrowthCondition):
        return value
    if isinstance(value, dict):
        return GrowthCondition.from_dict(value)
    text = str(value).strip()
    if "=" in text:
        kind, _, number = text.partition("=")
        try:
            return GrowthCondition(kind.strip(), int(number))
        except ValueError:
            raise ConfigError(f"invalid growth condition {value!r}")
    try:
        return GrowthCondition.from_number(int(text))
    except ValueError:
        raise ConfigError(f"invalid growth condition {value!r}")


def condition_label(condition: GrowthCondition):
    if condition == GrowthCondition.from_number(1):
        return "1"
    if condition == GrowthCondition.from_number(2):
        return "2"
    return f"{condition.kind}={condition.value}"


class ExperimentConfig:
    """Everything a run needs; unknown keys are rejected."""

    def __init__(self, **fields):
        unknown = set(fields) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown experiment settings: {sorted(unknown)}")
        values = dict(DEFAULTS)
        values.update({k: v for k, v in fields.items() if v is not None})
        for key, value in values.items():
            setattr(self, key, value)
        self.condition = parse_condition(self.condition)
        self.validate()

    @classmethod
    def from_file(cls, path, **overrides):
        """JSON file of settings; non-None overrides win."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def validate(self):
        if self.dataset is None and self.generator is None:
            raise ConfigError("either dataset or generator must be given")
        if self.task is not None and self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.ensemble not in ENSEMBLES:
            raise ConfigError(f"ensemble must be one of {ENSEMBLES}, got {self.ensemble!r}")
        if self.f1_average not in F1_AVERAGES:
            raise ConfigError(f"f1_average must be one of {F1_AVERAGES}, got {self.f1_average!r}")
        if int(self.n_trees) < 1 or int(self.repetitions) < 1 or int(self.workers) < 1:
            raise ConfigError("n_trees, repetitions and workers must be positive integers")
        for name in ("train_fraction", "inner_train_fraction"):
            if not 0.0 < float(getattr(self, name)) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.softmax_sign not in (-1, 1):
            raise ConfigError("softmax_sign must be -1 or 1")
        if self.eps_grid is not None or self.tau_grid is not None:
            check_grids(self.eps_grid or [0.0], self.tau_grid or [1.0])
        if self.train_params is not None:
            trainable = GRADIENT_PARAMS.get(self.model)
            if trainable is None:
                raise ConfigError(f"train_params only applies to {sorted(GRADIENT_PARAMS)}, not {self.model}")
            if not self.train_params or not set(self.train_params) <= set(trainable):
                raise ConfigError(f"{self.model} can train {list(trainable)}, got {list(self.train_params)}")
        self.grad_config()

    def grad_config(self) -> GradConfig:
        return GradConfig(learning_rate=self.learning_rate, max_iters=self.max_iters,
                          tolerance=self.tolerance, seed=self.seed, which_params=self.train_params)

    def forest_config(self, seed) -> ForestConfig:
        return ForestConfig(n_trees=self.n_trees, ensemble=self.ensemble, condition=self.condition,
                            max_features=self.max_features, seed=seed)

    def resolved_grids(self, task):
        eps = self.eps_grid
        if eps is None:
            eps = config.CLASSIFICATION_EPS_GRID if task == "classification" else config.REGRESSION_EPS_GRID
        tau = self.tau_grid if self.tau_grid is not None else config.TAU_GRID
        return [float(e) for e in eps], [float(t) for t in tau]

    def split_plan(self) -> SplitPlan:
        return SplitPlan(self.repetitions, self.train_fraction, self.seed)

    def to_dict(self):
        data = {key: getattr(self, key) for key in DEFAULTS}
        data["condition"] = self.condition.to_dict()
        data["output"] = None if self.output is None else str(self.output)
        data["data_dir"] = None if self.data_dir is None else str(self.data_dir)
        return data


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """Generator spec, catalog name or CSV path, in that order."""
    if cfg.generator:
        spec = dict(cfg.generator)
        if "kind" not in spec:
            raise ConfigError("generator spec needs a 'kind'")
        spec.setdefault("seed", cfg.seed)
        ds = generate(spec.pop("kind"), **spec)
    else:
        catalog = DatasetCatalog()
        if cfg.dataset in catalog:
            entry = catalog.get(cfg.dataset)
            if cfg.task is not None and cfg.task != entry.task:
                raise ConfigError(f"{entry.name} is a {entry.task} dataset, not {cfg.task}")
            ds = entry.load(cfg.data_dir, seed=cfg.seed)
        else:
            ds = load_csv(cfg.dataset, cfg.target, task=cfg.task or "regression", one_hot=cfg.one_hot)
    if cfg.task is not None and cfg.task != ds.task:
        raise ConfigError(f"dataset task {ds.task} does not match the configured task {cfg.task}")
    check_model(cfg.model, ds.task)
    return ds.minmax_scaled() if cfg.minmax else ds


def comparison_models(model):
    """Report rows: RF baseline, then Softmax, then the requested model."""
    if model == "baseline":
        return ["baseline"]
    rows = ["baseline"]
    for extra in ("softmax", model):
        if extra not in rows:
            rows.append(extra)
    return rows


def score(ds: Dataset, prediction, f1_average="macro") -> Dict[str, float]:
    if ds.is_classification:
        return {"f1": f1(ds.targets, prediction[1], ds.n_classes, average=f1_average)}
    return {"r2": r2(ds.targets, prediction), "mae": mae(ds.targets, prediction)}


def primary_metric(task):
    return "f1" if task == "classification" else "r2"


def repetition_seed(seed, repetition):
    return int(np.random.SeedSequence([int(seed), int(repetition)]).generate_state(1)[0])


def run_repetition(cfg: ExperimentConfig, ds: Dataset, repetition, train_idx, test_idx, models):
    """Fit one forest and evaluate every grid cell of every model; returns a plain dict."""
    seed = repetition_seed(cfg.seed, repetition)
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    forest = fit_forest(train, cfg.forest_config(seed))
    train_batch, test_batch = panel_batch(forest, train.features), panel_batch(forest, test.features)

    fit_rows, val_rows = inner_split(train.n, cfg.inner_train_fraction, seed)
    fit_ds, val_ds = train.subset(fit_rows), train.subset(val_rows)
    fit_batch, val_batch = train_batch.take(fit_rows), train_batch.take(val_rows)

    eps_grid, tau_grid = cfg.resolved_grids(ds.task)
    primary = primary_metric(ds.task)
    options = {"softmax_sign": cfg.softmax_sign, "grad_config": cfg.grad_config(),
               "qp_tolerance": config.QP_GRID_TOLERANCE}

    result = {"repetition": repetition, "seed": seed, "models": {}}
    for model in models:
        cells = []
        # each abrf1-qp cell starts from the previous cell's w on the same rows
        inner_w = full_w = None
        for epsilon, tau in grid_cells(model, eps_grid, tau_grid):
            cell = {"epsilon": epsilon, "tau": tau, "val": None, "test": None, "error": None}
            try:
                inner = fit_attention(model, fit_batch, fit_ds, epsilon, tau or 1.0, qp_start=inner_w, **options)
                cell["val"] = score(val_ds, predict_panel(model, inner, val_batch), cfg.f1_average)[primary]
                params = fit_attention(model, train_batch, train, epsilon, tau or 1.0, qp_start=full_w, **options)
                if model == "abrf1-qp":
                    inner_w, full_w = inner.w, params.w
                cell["test"] = score(test, predict_panel(model, params, test_batch), cfg.f1_average)
                cell["solver"] = params.meta.get("solver")
            except (SolverError, MetricError) as exc:
                console.warn(f"repetition {repetition}: {model} eps={epsilon} tau={tau} failed: {exc}")
                cell["error"] = str(exc)
            cells.append(cell)

        scored = [i for i, c in enumerate(cells) if c["val"] is not None and c["test"] is not None]
        if not scored:
            raise SolverError(f"every grid cell failed for {model} in repetition {repetition}")
        chosen = min(scored, key=lambda i: (-cells[i]["val"], cells[i]["epsilon"], cells[i]["tau"] or 0.0))
        result["models"][model] = {"cells": cells, "chosen": chosen}

    console.say(f"  ✓ repetition {repetition + 1}/{cfg.repetitions}")
    return result


def run_repetitions(cfg: ExperimentConfig, ds: Dataset, models) -> List[dict]:
    splits = make_splits(ds, cfg.split_plan())
    jobs = list(enumerate(splits))

    def run(job):
        repetition, (train_idx, test_idx) = job
        return run_repetition(cfg, ds, repetition, train_idx, test_idx, models)

    results = gather_processes(run, jobs, limit=int(cfg.workers))
    return sorted(results, key=lambda r: r["repetition"])


def _cell_uses(model):
    """Which tuning parameters a model's grid varies."""
    return {
        "baseline": (False, False),
        "softmax": (False, True),
        "abrf2": (False, False),
        "abrf3": (True, False),
    }.get(model, (True, True))


def summarize_model(model, repetitions: List[dict], task) -> EvalReport:
    primary = primary_metric(task)
    uses_eps, uses_tau = _cell_uses(model)
    values, secondary, chosen = [], [], []
    for rep in repetitions:
        entry = rep["models"][model]
        cell = entry["cells"][entry["chosen"]]
        values.append(cell["test"][primary])
        if task == "regression":
            secondary.append(cell["test"]["mae"])
        chosen.append((cell["epsilon"] if uses_eps else None, cell["tau"] if uses_tau else None))

    surface = grid_surface(model, repetitions, task)
    complete = [row for row in surface if row["failures"] == 0]
    test_selected = None
    if complete and (uses_eps or uses_tau):
        best = min(complete, key=lambda r: (-r["mean"], r["epsilon"], r["tau"] or 0.0))
        test_selected = {"epsilon": best["epsilon"] if uses_eps else None,
                         "tau": best["tau"] if uses_tau else None,
                         "mean": best["mean"], "std": best["std"]}
    return EvalReport(model, primary, values, secondary if task == "regression" else None,
                      chosen, test_selected)


def grid_surface(model, repetitions: List[dict], task) -> List[dict]:
    """Mean test and validation score of every grid cell over repetitions."""
    primary = primary_metric(task)
    n_cells = len(repetitions[0]["models"][model]["cells"])
    rows = []
    for i in range(n_cells):
        cells = [rep["models"][model]["cells"][i] for rep in repetitions]
        tests = [c["test"][primary] for c in cells if c["test"] is not None]
        vals = [c["val"] for c in cells if c["val"] is not None]
        rows.append({
            "model": model,
            "epsilon": cells[0]["epsilon"],
            "tau": cells[0]["tau"],
            "metric": primary,
            "mean": float(np.mean(tests)) if tests else None,
            "std": float(np.std(tests)) if tests else None,
            "val_mean": float(np.mean(vals)) if vals else None,
            "failures": sum(1 for c in cells if c["test"] is None),
        })
    return rows


def default_output(cfg: ExperimentConfig, ds: Dataset, kind):
    name = (ds.name or "dataset").replace(" ", "_")
    return config.REPORTS_DIR / f"{name}_{cfg.model}_{cfg.ensemble}_c{condition_label(cfg.condition)}_{kind}"


def _describe(ds: Dataset):
    return {"name": ds.name, "task": ds.task, "n": ds.n, "m": ds.m, "n_classes": ds.n_classes}


def run_experiment(cfg: ExperimentConfig, ds: Optional[Dataset] = None) -> dict:
    """Full evaluation; returns the JSON-ready report."""
    ds = ds if ds is not None else load_dataset(cfg)
    models = comparison_models(cfg.model)
    eps_grid, tau_grid = cfg.resolved_grids(ds.task)

    console.banner(f"🌲 {ds.name}: {cfg.model} on {cfg.ensemble.upper()}, condition {condition_label(cfg.condition)}")
    console.say(f"📁 n={ds.n} m={ds.m} task={ds.task}; {cfg.repetitions} repetitions, {cfg.n_trees} trees")

    repetitions = run_repetitions(cfg, ds, models)
    reports = [summarize_model(model, repetitions, ds.task) for model in models]

    echoed = cfg.to_dict()
    echoed.update({"task": ds.task, "eps_grid": eps_grid, "tau_grid": tau_grid})
    return {
        "config": echoed,
        "dataset": _describe(ds),
        "models": [r.to_dict() for r in reports],
        "grids": {model: grid_surface(model, repetitions, ds.task) for model in models
                  if model != "baseline"},
    }


def report_rows(report: dict) -> List[dict]:
    """One CSV row per model, columns in the layout of the comparison tables."""
    cfg, ds = report["config"], report["dataset"]
    condition = condition_label(GrowthCondition.from_dict(cfg["condition"]))
    rows = []
    for model in report["models"]:
        selected = model["test_selected"] or {}
        metric = model["metric"]
        row = {
            "dataset": ds["name"],
            "task": ds["task"],
            "ensemble": cfg["ensemble"],
            "condition": condition,
            "model": model["model"],
            "repetitions": model["repetitions"],
            "eps_opt": model["eps_opt"],
            "tau_opt": model["tau_opt"],
            f"{metric}_mean": model["mean"],
            f"{metric}_std": model["std"],
        }
        if "mae_mean" in model:
            row["mae_mean"] = model["mae_mean"]
            row["mae_std"] = model["mae_std"]
        row["eps_opt_test"] = selected.get("epsilon")
        row["tau_opt_test"] = selected.get("tau")
        row[f"{metric}_test_selected"] = selected.get("mean")
        rows.append(row)
    return rows


def write_json(data, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")


def write_csv(rows: List[dict], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def cmd_run(cfg: ExperimentConfig) -> Dict[str, Path]:
    """Run the evaluation and write <output>.json and <output>.csv."""
    ds = load_dataset(cfg)
    report = run_experiment(cfg, ds)
    stem = Path(cfg.output) if cfg.output else default_output(cfg, ds, "run")
    paths = {"json": stem.with_suffix(".json"), "csv": stem.with_suffix(".csv")}
    write_json(report, paths["json"])
    write_csv(report_rows(report), paths["csv"])

    for model in report["models"]:
        eps = "" if model["eps_opt"] is None else f" eps_opt={model['eps_opt']:.3f}"
        console.say(f"✅ {model['model']:<9} {model['metric']}={model['mean']:.3f} ± {model['std']:.3f}{eps}")
    console.say(f"📁 Reports: {paths['json']}, {paths['csv']}")
    return paths


def run_grid(cfg: ExperimentConfig, ds: Optional[Dataset] = None) -> List[dict]:
    """Grid surface rows for cfg.model plus one baseline reference row."""
    ds = ds if ds is not None else load_dataset(cfg)
    models = ["baseline"] if cfg.model == "baseline" else ["baseline", cfg.model]
    console.banner(f"🌲 {ds.name}: {cfg.model} grid surface")
    repetitions = run_repetitions(cfg, ds, models)
    rows = [] if cfg.model == "baseline" else grid_surface(cfg.model, repetitions, ds.task)
    baseline = grid_surface("baseline", repetitions, ds.task)[0]
    baseline.update({"epsilon": None, "tau": None})
    rows.append(baseline)
    return rows


def cmd_grid(cfg: ExperimentConfig) -> Path:
    ds = load_dataset(cfg)
    rows = run_grid(cfg, ds)
    stem = Path(cfg.output) if cfg.output else default_output(cfg, ds, "grid")
    path = stem.with_suffix(".csv")
    write_csv(rows, path)
    console.say(f"📁 Grid surface: {path} ({len(rows)} rows)")
    return path
