"""
Model persistence: a model directory holds two JSON files.

    forest.json    the fitted trees (written only when the forest is fit)
    weights.json   model name, attention parameters, input schema, tuning

Retraining with weights_only=True reads forest.json, trains new
parameters on new data and rewrites weights.json alone, so the trees are
reused as they are.
"""

import json
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from abrf import console
from abrf.attention import AttentionParams, model_weights
from abrf.data import Dataset, read_table
from abrf.errors import ConfigError, DatasetError, SchemaMismatchError
from abrf.forest import Forest, ForestConfig, fit_forest, panel_batch
from abrf.metrics import kde_grid, kde_weights
from abrf.solver import GradConfig, fit_attention, grid_cells, grid_search, predict_panel

FOREST_FILE = "forest.json"
WEIGHTS_FILE = "weights.json"
FORMAT_VERSION = 1


def _write(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")


def _read(path: Path):
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"model file {path} must hold a JSON object")
    return data


def save_forest(forest: Forest, model_dir) -> Path:
    path = Path(model_dir) / FOREST_FILE
    _write(path, forest.to_dict())
    return path


def load_forest(model_dir) -> Forest:
    return Forest.from_dict(_read(Path(model_dir) / FOREST_FILE))


def load_model(model_dir):
    """(forest, manifest, params) of a saved model."""
    manifest = _read(Path(model_dir) / WEIGHTS_FILE)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported weights format version {manifest.get('format_version')!r}")
    forest = Forest.from_dict(_read(Path(model_dir) / manifest.get("forest_file", FOREST_FILE)))
    return forest, manifest, AttentionParams.from_dict(manifest["params"])


def check_dataset_schema(forest: Forest, ds: Dataset):
    if ds.task != forest.mode:
        raise SchemaMismatchError(f"saved forest is for {forest.mode}, dataset is {ds.task}")
    if ds.m != forest.n_features:
        raise SchemaMismatchError(f"saved forest expects {forest.n_features} features, dataset has {ds.m}")
    if ds.is_classification and ds.n_classes != forest.n_classes:
        raise SchemaMismatchError(f"saved forest has {forest.n_classes} classes, dataset has {ds.n_classes}")


def cmd_fit(ds: Dataset, model, model_dir, forest_config: Optional[ForestConfig] = None,
            epsilon=None, tau=None, weights_only=False, softmax_sign=-1,
            grad_config: Optional[GradConfig] = None, eps_grid=None, tau_grid=None,
            trace_path=None, seed=0):
    """
    Fit (or reuse) a forest and train `model`'s parameters on ds.

    A fixed epsilon/tau pins that parameter; anything left open is tuned by
    grid_search. Returns the manifest that was written.
    """
    model_dir = Path(model_dir)
    if weights_only:
        forest = load_forest(model_dir)
        check_dataset_schema(forest, ds)
        console.say(f"🌲 Reusing {model_dir / FOREST_FILE} ({forest.n_trees} trees)")
    else:
        forest = fit_forest(ds, forest_config or ForestConfig(seed=seed))
        save_forest(forest, model_dir)
        console.say(f"🌲 Fitted {forest.n_trees} trees → {model_dir / FOREST_FILE}")

    batch = panel_batch(forest, ds.features)
    eps_values = [epsilon] if epsilon is not None else eps_grid
    tau_values = [tau] if tau is not None else tau_grid
    trace = [] if trace_path else None
    tuning = None

    cells = grid_cells(model, eps_values or [0.0], tau_values or [1.0])
    if len(cells) == 1:
        eps, t = cells[0]
        params = fit_attention(model, batch, ds, eps, t or 1.0, softmax_sign, grad_config, trace=trace)
    else:
        console.say(f"⚙️  Tuning {model} over {len(cells)} grid cells")
        params, report = grid_search(forest, ds, model, eps_values, tau_values, seed=seed, batch=batch,
                                     softmax_sign=softmax_sign, grad_config=grad_config)
        tuning = report.to_dict()
        if trace is not None:
            params = fit_attention(model, batch, ds, params.epsilon, params.tau, softmax_sign,
                                   grad_config, trace=trace)

    manifest = {
        "format_version": FORMAT_VERSION,
        "model": model,
        "task": forest.mode,
        "n_features": forest.n_features,
        "feature_names": forest.feature_names,
        "class_labels": forest.class_labels,
        "forest_file": FOREST_FILE,
        "params": params.to_dict(),
        "tuning": tuning,
        "training": {"dataset": ds.name, "n": ds.n, "seed": seed},
    }
    _write(model_dir / WEIGHTS_FILE, manifest)
    console.say(f"✅ {model} weights → {model_dir / WEIGHTS_FILE}")

    if trace_path:
        write_trace(trace, trace_path)
    return manifest


def write_trace(trace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(trace, columns=["iteration", "objective"]).to_csv(
        path, index=False, float_format="%.12g", lineterminator="\n")
    console.say(f"📁 Solver trace → {path} ({len(trace)} rows)")


def read_features(path, forest: Forest) -> np.ndarray:
    """
    Feature matrix of an input CSV in the forest's column order.

    Columns are matched by name when every feature name is present (extra
    columns are ignored); otherwise the file must have exactly m columns.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"input file not found: {path}")
    frame = read_table(path, skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    names = forest.feature_names
    if all(name in frame.columns for name in names):
        frame = frame[names]
    elif frame.shape[1] != forest.n_features:
        raise SchemaMismatchError(
            f"expected {forest.n_features} features ({', '.join(names)}), got {frame.shape[1]} columns")
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise DatasetError(f"non-numeric or missing value at row {row + 1}, column {frame.columns[col]!r}",
                           row=int(row) + 1, column=frame.columns[col])
    return values


def predict_frame(model_dir, X) -> pd.DataFrame:
    forest, manifest, params = load_model(model_dir)
    prediction = predict_panel(manifest["model"], params, panel_batch(forest, X))
    if forest.is_classification:
        probs, labels = prediction
        names = forest.class_labels or [str(c) for c in range(forest.n_classes)]
        frame = pd.DataFrame({"label": [names[c] for c in labels]})
        for c, name in enumerate(names):
            frame[f"p_{name}"] = probs[:, c]
        return frame
    return pd.DataFrame({"prediction": prediction})


def cmd_predict(model_dir, input_path, output_path) -> Path:
    forest = load_model(model_dir)[0]
    frame = predict_frame(model_dir, read_features(input_path, forest))
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output_path, index=False, float_format="%.12g", lineterminator="\n")
    console.say(f"✅ {len(frame)} predictions → {output_path}")
    return output_path


def cmd_kde(model_dir, input_path, output_path, row=0, points=601) -> Path:
    """KDE curves of the Softmax weights and the saved model's weights for one input row."""
    forest, manifest, params = load_model(model_dir)
    X = read_features(input_path, forest)
    if not 0 <= row < X.shape[0]:
        raise DatasetError(f"row {row} out of range for {X.shape[0]} input rows")
    instance = panel_batch(forest, X[row:row + 1]).row(0)
    softmax_alpha = model_weights("softmax", instance, params)
    model_alpha = model_weights(manifest["model"], instance, params)
    grid = kde_grid(np.concatenate([softmax_alpha, model_alpha]), points=points)
    _, rho_softmax = kde_weights(softmax_alpha, grid)
    _, rho_model = kde_weights(model_alpha, grid)
    frame = pd.DataFrame({"t": grid, "softmax": rho_softmax, manifest["model"]: rho_model})
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output_path, index=False, float_format="%.12g", lineterminator="\n")
    console.say(f"✅ KDE curves ({points} points) → {output_path}")
    return output_path
