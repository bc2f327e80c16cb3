"""
Training of attention parameters on a fixed forest.

    abrf1-qp   w minimising sum_s (r_s - eps V_s w)^2 over the simplex
    abrf1-lp   w minimising sum_s |Q_s - eps V_s w| over the simplex
    abrf2/3    v, z (and w) by gradient descent on softmax logits

All solvers work on a PanelBatch of the training rows, so the trees are
never refit when weights are retrained. grid_search tunes (epsilon, tau)
on an inner train/validation split of the training rows.

Usage:
    batch = panel_batch(forest, train.features)
    params = fit_attention("abrf1-qp", batch, train, epsilon=0.5, tau=1.0)
    y_hat = predict_panel("abrf1-qp", params, panel_batch(forest, test.features))
"""

import math
from typing import List, Optional

import numpy as np
from scipy.special import softmax

from abrf import config, console
from abrf.attention import (
    MODELS,
    AttentionParams,
    abrf2_weights,
    model_weights,
    predict_classification,
    predict_regression,
    softmax_scores,
    uniform,
)
from abrf.data import Dataset, inner_split
from abrf.errors import ConfigError, DivergenceError, MetricError, SolverError
from abrf.forest import PanelBatch, panel_batch
from abrf.lp import linprog_simplex
from abrf.metrics import f1, r2
from abrf.parallel import gather_threads

GRADIENT_PARAMS = {"abrf2": ("v", "z"), "abrf3": ("v", "z", "w")}
REGRESSION_ONLY = ("abrf1-lp",)


def project_simplex(y):
    """Euclidean projection onto the unit simplex (sort and threshold)."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise SolverError("project_simplex needs a finite, non-empty vector")
    u = np.sort(y)[::-1]
    excess = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u - excess / np.arange(1, y.size + 1) > 0)[-1]
    return np.maximum(y - excess[rho] / (rho + 1.0), 0.0)


def _targets(ds):
    return ds.targets if isinstance(ds, Dataset) else np.asarray(ds)


# ---------------------------------------------------------------------------
# ABRF-1, squared loss
# ---------------------------------------------------------------------------

class QpInstance:
    """f(w) = sum_s (r_s - eps * V_s . w)^2 over the unit simplex."""

    def __init__(self, V, r, epsilon):
        V = np.asarray(V, dtype=float)
        r = np.asarray(r, dtype=float)
        if V.ndim != 2 or r.shape != (V.shape[0],):
            raise SolverError(f"inconsistent QP dimensions: V {V.shape}, r {r.shape}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(r))):
            raise SolverError("QP instance has non-finite entries")
        if not 0.0 <= float(epsilon) <= 1.0:
            raise SolverError(f"epsilon must lie in [0, 1], got {epsilon!r}")
        self.V = V
        self.r = r
        self.epsilon = float(epsilon)

    @property
    def n_trees(self):
        return self.V.shape[1]

    def objective(self, w):
        residual = self.r - self.epsilon * (self.V @ w)
        return float(residual @ residual)


def build_qp_regression(values, D, y, epsilon) -> QpInstance:
    """r_s = y_s - (1 - eps) sum_k D_k(x_s) B_k(x_s)."""
    values = np.asarray(values, dtype=float)
    r = np.asarray(y, dtype=float) - (1.0 - epsilon) * (D * values).sum(axis=1)
    return QpInstance(values, r, epsilon)


def build_qp_classification(dists, D, onehot, epsilon) -> QpInstance:
    """Rows stacked over (instance, class): n*C rows of p_k(x_s, c)."""
    dists = np.asarray(dists, dtype=float)
    n, T, C = dists.shape
    V = dists.transpose(0, 2, 1).reshape(n * C, T)
    r = (onehot - (1.0 - epsilon) * np.einsum("nt,ntc->nc", D, dists)).reshape(n * C)
    return QpInstance(V, r, epsilon)


def solve_qp(inst: QpInstance, tolerance=config.QP_TOLERANCE, max_iters=config.QP_MAX_ITERS,
             trace: Optional[list] = None, x0=None):
    """
    Monotone accelerated projected gradient with fixed step 1/L.

    L = 2 eps^2 lambda_max(V^T V). Momentum restarts whenever a step would
    increase f, so the accepted objective never increases. Stops when the
    projected-gradient step ||w - P(w - grad/L)||_inf drops below tolerance.
    x0 (projected onto the simplex) replaces the uniform starting point.
    Returns (w, objective).
    """
    T = inst.n_trees
    eps = inst.epsilon
    if T == 1:
        w = np.ones(1)
        return w, inst.objective(w)
    if eps == 0.0:
        w = uniform(T)
        return w, inst.objective(w)

    G = inst.V.T @ inst.V
    b = inst.V.T @ inst.r
    c0 = float(inst.r @ inst.r)
    lipschitz = 2.0 * eps * eps * float(np.linalg.eigvalsh(G)[-1])
    if not lipschitz > 0.0:
        w = uniform(T)
        return w, inst.objective(w)

    def f(w):
        return c0 - 2.0 * eps * float(b @ w) + eps * eps * float(w @ G @ w)

    def grad(w):
        return 2.0 * eps * (eps * (G @ w) - b)

    if x0 is None:
        x = uniform(T)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (T,):
            raise SolverError(f"QP start has shape {x0.shape}, expected ({T},)")
        x = project_simplex(x0)
    fx = f(x)
    y, t = x, 1.0
    if trace is not None:
        trace.append((0, fx))
    for iteration in range(1, int(max_iters) + 1):
        z = project_simplex(y - grad(y) / lipschitz)
        fz = f(z)
        if not math.isfinite(fz):
            raise SolverError(f"QP objective became non-finite at iteration {iteration}")
        # the step at x costs another projection; test it only once the step at y is small
        small = np.abs(z - y).max() < tolerance
        if fz <= fx:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = z + ((t - 1.0) / t_next) * (z - x)
            x, fx, t = z, fz, t_next
        else:
            y, t = x, 1.0
        if trace is not None:
            trace.append((iteration, fx))
        if small:
            step = x - project_simplex(x - grad(x) / lipschitz)
            if np.abs(step).max() < tolerance:
                break

    objective = inst.objective(x)
    if not math.isfinite(objective):
        raise SolverError("QP objective is non-finite")
    return x, objective


def solve_qp_classification(batch: PanelBatch, ds, epsilon, tau, softmax_sign=-1, **options):
    """Stacked one-hot QP for a classification forest; returns (w, objective)."""
    if batch.dists is None:
        raise ConfigError("solve_qp_classification needs a classification panel")
    onehot = np.eye(batch.dists.shape[2])[_targets(ds)]
    D = softmax_scores(batch.distances, tau, softmax_sign)
    return solve_qp(build_qp_classification(batch.dists, D, onehot, epsilon), **options)


# ---------------------------------------------------------------------------
# ABRF-1, absolute loss
# ---------------------------------------------------------------------------

class LpInstance:
    """sum_s |Q_s - eps * V_s . w| over the unit simplex."""

    def __init__(self, Q, V, epsilon):
        Q = np.asarray(Q, dtype=float)
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or Q.shape != (V.shape[0],):
            raise SolverError(f"inconsistent LP dimensions: V {V.shape}, Q {Q.shape}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(Q))):
            raise SolverError("LP instance has non-finite entries")
        self.Q = Q
        self.V = V
        self.epsilon = float(epsilon)

    @property
    def n_trees(self):
        return self.V.shape[1]

    def objective(self, w):
        return float(np.abs(self.Q - self.epsilon * (self.V @ w)).sum())


def build_lp_regression(values, D, y, epsilon) -> LpInstance:
    values = np.asarray(values, dtype=float)
    Q = np.asarray(y, dtype=float) - (1.0 - epsilon) * (D * values).sum(axis=1)
    return LpInstance(Q, values, epsilon)


def solve_lp(inst: LpInstance, max_pivots=config.LP_MAX_PIVOTS):
    """
    Linear program over [w (T), G (n)] >= 0:

        minimise sum G_s
        s.t.  -eps V_s w - G_s <= -Q_s
               eps V_s w - G_s <=  Q_s
               sum w = 1
    """
    T = inst.n_trees
    if T == 1:
        w = np.ones(1)
        return w, inst.objective(w)
    if inst.epsilon == 0.0:
        w = uniform(T)
        return w, inst.objective(w)

    n = inst.V.shape[0]
    eps_V = inst.epsilon * inst.V
    eye = np.eye(n)
    c = np.concatenate([np.zeros(T), np.ones(n)])
    A_ub = np.vstack([np.hstack([-eps_V, -eye]), np.hstack([eps_V, -eye])])
    b_ub = np.concatenate([-inst.Q, inst.Q])
    A_eq = np.concatenate([np.ones(T), np.zeros(n)])[None, :]
    result = linprog_simplex(c, A_ub, b_ub, A_eq, np.ones(1), max_pivots=max_pivots)
    w = project_simplex(result.x[:T])
    return w, inst.objective(w)


def solve_l1_subgradient(inst: LpInstance, max_iters=config.GRAD_MAX_ITERS, trace: Optional[list] = None):
    """Projected subgradient descent with normalised steps; returns the best iterate."""
    T = inst.n_trees
    w = uniform(T)
    best_w, best = w, inst.objective(w)
    if T == 1 or inst.epsilon == 0.0:
        return best_w, best
    radius = math.sqrt(2.0)
    for iteration in range(1, int(max_iters) + 1):
        residual = inst.Q - inst.epsilon * (inst.V @ w)
        g = -inst.epsilon * (inst.V.T @ np.sign(residual))
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            break
        w = project_simplex(w - radius / (norm * math.sqrt(iteration)) * g)
        value = inst.objective(w)
        if value < best:
            best_w, best = w, value
        if trace is not None:
            trace.append((iteration, best))
    return best_w, best


# ---------------------------------------------------------------------------
# ABRF-2 / ABRF-3
# ---------------------------------------------------------------------------

class GradConfig:
    def __init__(self, learning_rate=config.GRAD_LEARNING_RATE, max_iters=config.GRAD_MAX_ITERS,
                 tolerance=config.GRAD_TOLERANCE, seed=0, which_params=None, init_scale=0.0):
        if not float(learning_rate) > 0:
            raise ConfigError(f"learning_rate must be positive, got {learning_rate!r}")
        if int(max_iters) < 1:
            raise ConfigError(f"max_iters must be at least 1, got {max_iters!r}")
        if not float(tolerance) > 0:
            raise ConfigError(f"tolerance must be positive, got {tolerance!r}")
        unknown = set(which_params or ()) - {"v", "z", "w"}
        if unknown:
            raise ConfigError(f"unknown trainable parameters {sorted(unknown)}")
        self.learning_rate = float(learning_rate)
        self.max_iters = int(max_iters)
        self.tolerance = float(tolerance)
        self.seed = int(seed)
        # None trains every vector the model has
        self.which_params = None if not which_params else tuple(p for p in ("v", "z", "w") if p in which_params)
        self.init_scale = float(init_scale)

    def replace(self, **changes):
        fields = self.to_dict()
        fields.update(changes)
        return GradConfig(**fields)

    def to_dict(self):
        return {"learning_rate": self.learning_rate, "max_iters": self.max_iters,
                "tolerance": self.tolerance, "seed": self.seed,
                "which_params": None if self.which_params is None else list(self.which_params),
                "init_scale": self.init_scale}


def loss_scale(targets, classification):
    """n * Var(y) for regression, n for classification (never 0)."""
    n = len(targets)
    if classification:
        return float(n)
    var = float(np.var(targets))
    return n * var if var > 0 else float(n)


def loss_and_gradient(batch: PanelBatch, targets, params: AttentionParams, model="abrf2", scale=1.0):
    """
    Squared loss of the abrf2/abrf3 prediction divided by `scale`, and its
    gradient with respect to the raw vectors v, z and w.

    For classification `targets` are class ids and the loss is the squared
    distance of the predicted distribution to the one-hot vector.
    """
    if model not in GRADIENT_PARAMS:
        raise ConfigError(f"gradients are only defined for {sorted(GRADIENT_PARAMS)}, got {model!r}")
    params = params.filled(batch.n_trees, batch.n_features)
    sign, v, z, w = params.softmax_sign, params.v, params.z, params.w
    eps = params.epsilon if model == "abrf3" else 0.0

    d = batch.weighted_distances(z)
    S = softmax(sign * d * v / 2.0, axis=1)
    alpha = (1.0 - eps) * S + eps * w

    if batch.is_classification:
        onehot = np.eye(batch.dists.shape[2])[np.asarray(targets)]
        error = np.einsum("nt,ntc->nc", alpha, batch.dists) - onehot
        g_alpha = 2.0 * np.einsum("nc,ntc->nt", error, batch.dists)
    else:
        error = (alpha * batch.values).sum(axis=1) - np.asarray(targets, dtype=float)
        g_alpha = 2.0 * error[:, None] * batch.values
    loss = float((error * error).sum()) / scale
    g_alpha /= scale

    g_S = (1.0 - eps) * g_alpha
    g_scores = S * (g_S - (S * g_S).sum(axis=1, keepdims=True))
    g_d = g_scores * sign * v / 2.0
    grads = {
        "v": (g_scores * sign * d / 2.0).sum(axis=0),
        "z": 2.0 * z * np.einsum("nt,ntm->m", g_d, batch.sq_diffs),
        "w": eps * g_alpha.sum(axis=0),
    }
    return loss, grads


def _logits(p, floor=1e-12):
    return np.log(np.maximum(p, floor))


def train_gradient(forest, ds: Dataset, params_init: AttentionParams, cfg: Optional[GradConfig] = None,
                   model="abrf2", task=None, batch: Optional[PanelBatch] = None,
                   trace: Optional[list] = None) -> AttentionParams:
    """
    Full-batch gradient descent on softmax logits of the trainable vectors.

    Returns the parameters with the lowest training loss seen; meta holds
    the raw loss and the number of iterations run.
    """
    cfg = cfg or GradConfig()
    if model not in GRADIENT_PARAMS:
        raise ConfigError(f"train_gradient supports {sorted(GRADIENT_PARAMS)}, got {model!r}")
    which = cfg.which_params or GRADIENT_PARAMS[model]
    if not set(which) <= set(GRADIENT_PARAMS[model]):
        raise ConfigError(f"{model} can train {GRADIENT_PARAMS[model]}, got {which}")
    if task is not None and task != ds.task:
        raise ConfigError(f"task {task!r} does not match the dataset task {ds.task!r}")
    if batch is None:
        batch = panel_batch(forest, ds.features)

    targets = ds.targets
    scale = loss_scale(targets, ds.is_classification)
    current = params_init.filled(batch.n_trees, batch.n_features)
    rng = np.random.default_rng(cfg.seed)
    logits = {}
    for name in which:
        logits[name] = _logits(getattr(current, name))
        if cfg.init_scale > 0:
            logits[name] = logits[name] + rng.normal(0.0, cfg.init_scale, logits[name].shape)
    if cfg.init_scale > 0:
        current = current.replace(**{name: softmax(logits[name]) for name in which})

    best_params, best_loss = current, None
    previous = None
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        loss, grads = loss_and_gradient(batch, targets, current, model, scale)
        if not math.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at iteration {iteration}", iteration)
        if trace is not None:
            trace.append((iteration, loss * scale))
        if best_loss is None or loss < best_loss:
            best_params, best_loss = current, loss
        if previous is not None and abs(previous - loss) < cfg.tolerance:
            break
        previous = loss
        updates = {}
        for name in which:
            p, g = getattr(current, name), grads[name]
            logits[name] = logits[name] - cfg.learning_rate * p * (g - p @ g)
            updates[name] = softmax(logits[name])
        current = current.replace(**updates)

    meta = dict(best_params.meta)
    meta.update({"solver": "gradient", "loss": best_loss * scale, "iterations": iteration})
    return best_params.replace(meta=meta)


# ---------------------------------------------------------------------------
# Model dispatch
# ---------------------------------------------------------------------------

def check_model(model, task):
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {MODELS}")
    if model in REGRESSION_ONLY and task != "regression":
        raise ConfigError(f"model {model} is only available for regression")


def fit_attention(model, batch: PanelBatch, ds: Dataset, epsilon=0.0, tau=1.0, softmax_sign=-1,
                  grad_config: Optional[GradConfig] = None, lp_max_pivots=config.LP_MAX_PIVOTS,
                  qp_tolerance=config.QP_TOLERANCE, qp_max_iters=config.QP_MAX_ITERS,
                  trace: Optional[list] = None, qp_start=None) -> AttentionParams:
    """
    Train the parameters of `model` on the rows of `batch` (targets from ds).

    `trace` collects (iteration, objective) pairs of the iterative solver.
    `qp_start` is a w to start the abrf1-qp solver from, usually the
    solution of a neighbouring grid cell. grad_config.which_params limits
    gradient training to a subset of the model's vectors; the rest keep
    their starting values.
    """
    check_model(model, ds.task)
    if len(batch) != ds.n:
        raise ConfigError(f"panel has {len(batch)} rows but the dataset has {ds.n}")
    base = AttentionParams(epsilon=epsilon, tau=tau, softmax_sign=softmax_sign)
    if model in ("baseline", "softmax"):
        return base.replace(epsilon=0.0, meta={"solver": "none"})

    classification = ds.is_classification
    targets = ds.targets

    def qp_instance(D):
        if classification:
            return build_qp_classification(batch.dists, D, ds.one_hot(), epsilon)
        return build_qp_regression(batch.values, D, targets, epsilon)

    if model == "abrf1-qp":
        D = softmax_scores(batch.distances, tau, softmax_sign)
        w, objective = solve_qp(qp_instance(D), tolerance=qp_tolerance, max_iters=qp_max_iters,
                                trace=trace, x0=qp_start)
        return base.replace(w=w, meta={"solver": "qp", "objective": objective})

    if model == "abrf1-lp":
        D = softmax_scores(batch.distances, tau, softmax_sign)
        inst = build_lp_regression(batch.values, D, targets, epsilon)
        try:
            w, objective = solve_lp(inst, max_pivots=lp_max_pivots)
            solver = "lp"
        except SolverError as exc:
            console.warn(f"LP failed ({exc}); falling back to subgradient descent")
            w, objective = solve_l1_subgradient(inst, trace=trace)
            solver = "subgradient"
        return base.replace(w=w, meta={"solver": solver, "objective": objective})

    init = base.filled(batch.n_trees, batch.n_features)
    cfg = grad_config or GradConfig()
    if cfg.which_params is None:
        cfg = cfg.replace(which_params=GRADIENT_PARAMS[model])
    if model == "abrf2":
        init = init.replace(epsilon=0.0)
    else:
        S = abrf2_weights(batch, init.v, init.z, softmax_sign)
        w0, _ = solve_qp(qp_instance(S), tolerance=qp_tolerance, max_iters=qp_max_iters)
        init = init.replace(w=w0)
    return train_gradient(None, ds, init, cfg, model, batch=batch, trace=trace)


def predict_panel(model, params: AttentionParams, batch: PanelBatch):
    """Predictions (regression) or (class distributions, labels) for every row."""
    alpha = model_weights(model, batch, params)
    if batch.is_classification:
        return predict_classification(alpha, batch.dists)
    return predict_regression(alpha, batch.values)


def score_predictions(ds: Dataset, prediction, f1_average="macro"):
    """R^2 for regression, F1 for classification."""
    if ds.is_classification:
        return f1(ds.targets, prediction[1], ds.n_classes, average=f1_average)
    return r2(ds.targets, prediction)


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

def grid_cells(model, eps_grid, tau_grid):
    """(epsilon, tau) pairs a model is tuned over; None marks an unused parameter."""
    if model in ("baseline", "abrf2"):
        return [(0.0, None)]
    if model == "softmax":
        return [(0.0, float(t)) for t in tau_grid]
    if model == "abrf3":
        return [(float(e), None) for e in eps_grid]
    return [(float(e), float(t)) for e in eps_grid for t in tau_grid]


def check_grids(eps_grid, tau_grid):
    if not eps_grid or not tau_grid:
        raise ConfigError("epsilon and tau grids must be non-empty")
    if any(not 0.0 <= float(e) <= 1.0 for e in eps_grid):
        raise ConfigError("epsilon grid values must lie in [0, 1]")
    if any(not float(t) > 0.0 for t in tau_grid):
        raise ConfigError("tau grid values must be positive")


class GridCell:
    def __init__(self, epsilon, tau, metric=None, error=None):
        self.epsilon = epsilon
        self.tau = tau
        self.metric = metric
        self.error = error

    @property
    def failed(self):
        return self.metric is None

    def sort_key(self):
        return (-self.metric, self.epsilon, self.tau if self.tau is not None else 0.0)

    def to_dict(self):
        return {"epsilon": self.epsilon, "tau": self.tau, "metric": self.metric,
                "failed": self.failed, "error": self.error}


class GridReport:
    def __init__(self, model, metric_name, cells: List[GridCell]):
        self.model = model
        self.metric_name = metric_name
        self.cells = list(cells)

    def best(self) -> Optional[GridCell]:
        """Highest metric; ties go to the smaller epsilon, then the smaller tau."""
        valid = [c for c in self.cells if not c.failed]
        return min(valid, key=GridCell.sort_key) if valid else None

    def to_dict(self):
        return {"model": self.model, "metric": self.metric_name,
                "cells": [c.to_dict() for c in self.cells]}


def grid_search(forest, ds: Dataset, model, eps_grid=None, tau_grid=None, inner_train_fraction=0.8, seed=0,
                batch: Optional[PanelBatch] = None, softmax_sign=-1, grad_config=None,
                f1_average="macro", workers=1, **solver_options):
    """
    Tune (epsilon, tau) on an inner split of ds (inner_train_fraction of the
    rows train each cell, the rest score it), then retrain the best cell on
    all of ds. Cells whose solver fails are recorded, not raised. Cells run
    the QP at config.QP_GRID_TOLERANCE unless solver_options say otherwise.
    Returns (params, GridReport).
    """
    check_model(model, ds.task)
    if eps_grid is None:
        eps_grid = config.CLASSIFICATION_EPS_GRID if ds.is_classification else config.REGRESSION_EPS_GRID
    tau_grid = config.TAU_GRID if tau_grid is None else tau_grid
    check_grids(eps_grid, tau_grid)
    if batch is None:
        batch = panel_batch(forest, ds.features)

    fit_rows, val_rows = inner_split(ds.n, inner_train_fraction, seed)
    fit_ds, val_ds = ds.subset(fit_rows), ds.subset(val_rows)
    fit_batch, val_batch = batch.take(fit_rows), batch.take(val_rows)

    cell_options = {"qp_tolerance": config.QP_GRID_TOLERANCE, **solver_options}

    def run_cell(cell):
        epsilon, tau = cell
        try:
            params = fit_attention(model, fit_batch, fit_ds, epsilon, tau or 1.0, softmax_sign,
                                   grad_config, **cell_options)
            metric = score_predictions(val_ds, predict_panel(model, params, val_batch), f1_average)
            return GridCell(epsilon, tau, metric)
        except (SolverError, MetricError) as exc:
            console.warn(f"{model} cell eps={epsilon} tau={tau} failed: {exc}")
            return GridCell(epsilon, tau, error=str(exc))

    cells = gather_threads(run_cell, grid_cells(model, eps_grid, tau_grid), limit=workers)
    report = GridReport(model, "f1" if ds.is_classification else "r2", cells)
    best = report.best()
    if best is None:
        raise SolverError(f"every grid cell failed for {model}")
    params = fit_attention(model, batch, ds, best.epsilon, best.tau or 1.0, softmax_sign,
                           grad_config, **solver_options)
    return params, report
