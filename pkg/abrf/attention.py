"""
Attention weights over the trees of a forest and the weighted combiners.

    softmax     D_k = softmax_k(sign * d_k / (2 tau))
    abrf1       alpha = (1 - eps) D + eps w                   (eps-contamination)
    abrf2       alpha = softmax_k(sign * ||(x - A_k) * z||^2 v_k / 2)
    abrf3       alpha = (1 - eps) abrf2 + eps w

sign is -1 by default so that closer leaves get larger weights; +1 gives
the literal positive exponent. Every function accepts a single distance
vector (length T) or a batch (N x T) and works along the last axis.
"""

import numpy as np
from scipy.special import softmax

from abrf.errors import ConfigError

MODELS = ("baseline", "softmax", "abrf1-qp", "abrf1-lp", "abrf2", "abrf3")
DISTANCE_CAP = 1e30
SIMPLEX_TOL = 1e-9


def on_simplex(p, tol=SIMPLEX_TOL):
    p = np.asarray(p, dtype=float)
    return bool(np.all(p >= -tol) and np.all(np.abs(p.sum(axis=-1) - 1.0) <= tol))


def _check_simplex(p, name, length=None):
    if p is None:
        return None
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (length is not None and p.shape[0] != length):
        raise ConfigError(f"{name} must be a vector of length {length}, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or not on_simplex(p):
        raise ConfigError(f"{name} must be nonnegative and sum to 1")
    return p


def uniform(k):
    return np.full(int(k), 1.0 / int(k))


class AttentionParams:
    """
    Tunable and trained parameters of one attention model.

    epsilon and tau are tuning parameters; w, v (length T) and z (length m)
    are simplex points found by the solvers. Missing vectors mean uniform.
    `meta` records how the parameters were obtained (solver, fallbacks).
    """

    def __init__(self, epsilon=0.0, tau=1.0, w=None, v=None, z=None, softmax_sign=-1, meta=None):
        if not 0.0 <= float(epsilon) <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon!r}")
        if not float(tau) > 0.0:
            raise ConfigError(f"tau must be positive, got {tau!r}")
        if softmax_sign not in (-1, 1):
            raise ConfigError(f"softmax_sign must be -1 or 1, got {softmax_sign!r}")
        self.epsilon = float(epsilon)
        self.tau = float(tau)
        self.w = _check_simplex(w, "w")
        self.v = _check_simplex(v, "v")
        self.z = _check_simplex(z, "z")
        self.softmax_sign = int(softmax_sign)
        self.meta = dict(meta or {})

    def __repr__(self):
        return f"AttentionParams(epsilon={self.epsilon:.4g}, tau={self.tau:.4g})"

    def filled(self, n_trees, n_features):
        """Copy with every missing vector set to uniform."""
        return self.replace(
            w=self.w if self.w is not None else uniform(n_trees),
            v=self.v if self.v is not None else uniform(n_trees),
            z=self.z if self.z is not None else uniform(n_features),
        )

    def replace(self, **changes):
        fields = {"epsilon": self.epsilon, "tau": self.tau, "w": self.w, "v": self.v,
                  "z": self.z, "softmax_sign": self.softmax_sign, "meta": self.meta}
        fields.update(changes)
        return AttentionParams(**fields)

    def check_shapes(self, n_trees, n_features):
        for name, vec, length in (("w", self.w, n_trees), ("v", self.v, n_trees), ("z", self.z, n_features)):
            if vec is not None and vec.shape[0] != length:
                raise ConfigError(f"{name} has length {vec.shape[0]}, expected {length}")

    def to_dict(self):
        def listed(vec):
            return None if vec is None else [float(x) for x in vec]

        return {
            "epsilon": self.epsilon,
            "tau": self.tau,
            "w": listed(self.w),
            "v": listed(self.v),
            "z": listed(self.z),
            "softmax_sign": self.softmax_sign,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(epsilon=data.get("epsilon", 0.0), tau=data.get("tau", 1.0),
                   w=data.get("w"), v=data.get("v"), z=data.get("z"),
                   softmax_sign=data.get("softmax_sign", -1), meta=data.get("meta"))


class AttentionWeights:
    """Weights alpha of one instance over the T trees."""

    def __init__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim != 1 or not on_simplex(alpha):
            raise ConfigError("attention weights must be a probability vector")
        self.alpha = alpha

    def __len__(self):
        return len(self.alpha)

    def __repr__(self):
        return f"AttentionWeights({np.array2string(self.alpha, precision=4)})"


def softmax_scores(distances, tau, sign=-1):
    """softmax(sign * d / (2 tau)) along the last axis."""
    d = np.minimum(np.asarray(distances, dtype=float), DISTANCE_CAP)
    return softmax(sign * d / (2.0 * float(tau)), axis=-1)


def contaminate(D, w, epsilon):
    """(1 - eps) D + eps w; the result is asserted, never renormalised."""
    alpha = (1.0 - epsilon) * np.asarray(D, dtype=float) + epsilon * np.asarray(w, dtype=float)
    assert on_simplex(alpha), "contaminated weights left the simplex"
    return alpha


def abrf1_weights(distances, params: AttentionParams):
    D = softmax_scores(distances, params.tau, params.softmax_sign)
    w = params.w if params.w is not None else uniform(D.shape[-1])
    return contaminate(D, w, params.epsilon)


def _panel_distances(panel, z):
    if hasattr(panel, "weighted_distances"):
        return panel.weighted_distances(z)
    return np.asarray(panel, dtype=float)


def abrf2_weights(panel, v, z=None, sign=-1):
    """
    softmax_k(sign * ||(x - A_k) * z||^2 * v_k / 2).

    `panel` is an InstancePanel/PanelBatch (re-weighted with z) or an array of
    already z-weighted distances.
    """
    d = np.minimum(_panel_distances(panel, z), DISTANCE_CAP)
    v = uniform(d.shape[-1]) if v is None else np.asarray(v, dtype=float)
    return softmax(sign * d * v / 2.0, axis=-1)


def abrf3_weights(panel, params: AttentionParams):
    S = abrf2_weights(panel, params.v, params.z, params.softmax_sign)
    w = params.w if params.w is not None else uniform(S.shape[-1])
    return contaminate(S, w, params.epsilon)


def predict_regression(alpha, values):
    """sum_k alpha_k B_k (per row for batches)."""
    return (np.asarray(alpha) * np.asarray(values)).sum(axis=-1)


def predict_classification(alpha, dists):
    """p = alpha^T P and its argmax label (lowest class id on ties)."""
    alpha = np.asarray(alpha, dtype=float)
    dists = np.asarray(dists, dtype=float)
    probs = np.einsum("...k,...kc->...c", alpha, dists)
    return probs, np.argmax(probs, axis=-1)


def model_weights(model, panel, params: AttentionParams):
    """Attention weights of `model` for an InstancePanel or a PanelBatch."""
    d = panel.weighted_distances(None)
    n_trees = d.shape[-1]
    params = params.filled(n_trees, panel.sq_diffs.shape[-1])
    if model == "baseline":
        return np.broadcast_to(uniform(n_trees), d.shape).copy()
    if model == "softmax":
        return softmax_scores(d, params.tau, params.softmax_sign)
    if model in ("abrf1-qp", "abrf1-lp"):
        return abrf1_weights(d, params)
    if model == "abrf2":
        return abrf2_weights(panel, params.v, params.z, params.softmax_sign)
    if model == "abrf3":
        return abrf3_weights(panel, params)
    raise ConfigError(f"unknown model {model!r}; choose from {MODELS}")
