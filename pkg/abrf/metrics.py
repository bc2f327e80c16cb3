"""Accuracy measures, per-model evaluation summaries and weight KDE curves."""

from collections import Counter
from typing import List, Optional

import numpy as np
from scipy.stats import norm
from sklearn.metrics import f1_score, mean_absolute_error, r2_score

from abrf.errors import MetricError

F1_AVERAGES = ("macro", "micro", "weighted")


def _pair(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise MetricError(f"y_true and y_pred must be vectors of equal length, got {y_true.shape} and {y_pred.shape}")
    return y_true, y_pred


def r2(y_true, y_pred):
    """Coefficient of determination 1 - SS_res / SS_tot."""
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] < 2:
        raise MetricError("R^2 needs at least two observations")
    if np.all(y_true == y_true[0]):
        raise MetricError("R^2 is undefined for a constant y_true")
    return float(r2_score(y_true, y_pred))


def mae(y_true, y_pred):
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] == 0:
        raise MetricError("MAE of an empty sample")
    return float(mean_absolute_error(y_true, y_pred))


def f1(y_true, y_pred, n_classes, average="macro"):
    """
    F1 score averaged over the classes that occur in y_true or y_pred.

    A class with precision + recall = 0 scores 0.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    if average not in F1_AVERAGES:
        raise MetricError(f"average must be one of {F1_AVERAGES}, got {average!r}")
    for labels in (y_true, y_pred):
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise MetricError(f"class ids must lie in [0, {n_classes})")
    return float(f1_score(y_true, y_pred, average=average, zero_division=0))


def kde_grid(alpha, points=601, span=6.0):
    """Evaluation grid covering [min(alpha) - span, max(alpha) + span]."""
    alpha = np.asarray(alpha, dtype=float)
    return np.linspace(alpha.min() - span, alpha.max() + span, int(points))


def kde_weights(alpha, grid=None):
    """
    Gaussian KDE of the attention weights with unit bandwidth.

    rho(t) = (1/T) sum_k phi(t - alpha_k). Returns (grid, rho).
    """
    alpha = np.asarray(alpha, dtype=float)
    grid = kde_grid(alpha) if grid is None else np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise MetricError("KDE grid must be finite")
    rho = norm.pdf(grid[:, None] - alpha[None, :]).mean(axis=1)
    return grid, rho


def mode_of(values):
    """Most frequent value; ties go to the smallest."""
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


class EvalReport:
    """
    Per-repetition test scores of one model.

    `values` holds the primary measure (R^2 or F1) of every repetition,
    `secondary` the MAE values for regression. `eps_opt`/`tau_opt` are the
    validation-selected tuning parameters (mode over repetitions);
    `test_selected` describes the grid cell with the best mean test score.
    """

    def __init__(self, model, metric, values: List[float], secondary: Optional[List[float]] = None,
                 chosen: Optional[List[tuple]] = None, test_selected: Optional[dict] = None):
        self.model = model
        self.metric = metric
        self.values = [float(v) for v in values]
        self.secondary = None if secondary is None else [float(v) for v in secondary]
        self.chosen = list(chosen or [])
        self.test_selected = test_selected

    @property
    def repetitions(self):
        return len(self.values)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        return float(np.std(self.values))

    @property
    def eps_opt(self):
        eps = [c[0] for c in self.chosen if c[0] is not None]
        return mode_of(eps) if eps else None

    @property
    def tau_opt(self):
        taus = [c[1] for c in self.chosen if c[1] is not None]
        return mode_of(taus) if taus else None

    def to_dict(self):
        data = {
            "model": self.model,
            "metric": self.metric,
            "repetitions": self.repetitions,
            "mean": self.mean,
            "std": self.std,
            "values": self.values,
            "eps_opt": self.eps_opt,
            "tau_opt": self.tau_opt,
            "test_selected": self.test_selected,
        }
        if self.secondary is not None:
            data["mae_mean"] = float(np.mean(self.secondary))
            data["mae_std"] = float(np.std(self.secondary))
            data["mae_values"] = self.secondary
        return data
