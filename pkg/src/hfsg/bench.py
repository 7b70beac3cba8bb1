"""Baseline multi-output regressors and the generalization experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregator import make_datasets
from .errors import ConfigError, DimensionError, UndefinedScoreError, ValidationError
from .features import FeatureLayout, feature_matrix
from .signalio import generate_voltage_reference


def _as_2d(y):
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] if y.ndim == 1 else y


def r2_score(y_true, y_pred):
    """Coefficient of determination, averaged uniformly over output columns.

    A zero-variance column scores 1 if predicted exactly and 0 otherwise; if
    every column has zero variance the score is undefined.
    """
    t, p = _as_2d(y_true), _as_2d(y_pred)
    if t.shape != p.shape:
        raise DimensionError(f"shape mismatch {t.shape} vs {p.shape}")
    ss_res = np.sum((t - p) ** 2, axis=0)
    ss_tot = np.sum((t - t.mean(axis=0)) ** 2, axis=0)
    if np.all(ss_tot == 0):
        raise UndefinedScoreError("true values have zero variance")
    flat = ss_tot == 0
    scores = np.where(flat, np.where(ss_res == 0, 1.0, 0.0), 1.0 - ss_res / np.where(flat, 1.0, ss_tot))
    return float(np.mean(scores))


class KNNRegressor:
    """Unweighted k-nearest-neighbour regression on per-column standardized features."""

    name = "knn"

    def __init__(self, k=5):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.k = k

    def fit(self, x, y):
        x, y = np.asarray(x, dtype=np.float64), _as_2d(y)
        if x.shape[0] == 0:
            raise ValidationError("empty training set")
        if self.k > x.shape[0]:
            raise ConfigError(f"k={self.k} exceeds the {x.shape[0]} training rows")
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        self.x_ = (x - self.mean_) / self.scale_
        self.y_ = y
        return self

    def neighbours(self, query):
        q = (np.atleast_2d(np.asarray(query, dtype=np.float64)) - self.mean_) / self.scale_
        out = np.empty((q.shape[0], self.k), dtype=np.int64)
        step = max(1, (1 << 22) // max(1, self.x_.size))
        for s in range(0, q.shape[0], step):
            d = ((q[s:s + step, None, :] - self.x_[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equal distances resolve to the lowest training index
            out[s:s + step] = np.argsort(d, axis=1, kind="stable")[:, :self.k]
        return out

    def predict(self, query):
        return self.y_[self.neighbours(query)].mean(axis=1)


@dataclass
class _Node:
    value: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "_Node" = None
    right: "_Node" = None


class TreeRegressor:
    """Greedy axis-aligned regression tree minimizing the summed per-output squared error."""

    name = "tree"

    def __init__(self, max_depth=12, min_leaf=5):
        if max_depth < 0 or min_leaf < 1:
            raise ConfigError(f"invalid tree parameters max_depth={max_depth}, min_leaf={min_leaf}")
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, x, y):
        x, y = np.asarray(x, dtype=np.float64), _as_2d(y)
        if x.shape[0] == 0:
            raise ValidationError("empty training set")
        if x.shape[0] != y.shape[0]:
            raise DimensionError("feature and target row counts differ")
        self.root_ = self._grow(x, y, 0)
        return self

    def _grow(self, x, y, depth):
        node = _Node(y.mean(axis=0))
        n = x.shape[0]
        if depth >= self.max_depth or n < 2 * self.min_leaf:
            return node
        split = best_split(x, y, self.min_leaf)
        if split is None:
            return node
        f, thr, _ = split
        mask = x[:, f] <= thr
        node.feature, node.threshold = f, thr
        node.left = self._grow(x[mask], y[mask], depth + 1)
        node.right = self._grow(x[~mask], y[~mask], depth + 1)
        return node

    def predict(self, query):
        q = np.atleast_2d(np.asarray(query, dtype=np.float64))
        out = np.empty((q.shape[0], self.root_.value.size))
        self._route(self.root_, q, np.arange(q.shape[0]), out)
        return out

    def _route(self, node, q, idx, out):
        if node.left is None:
            out[idx] = node.value
            return
        go_left = q[idx, node.feature] <= node.threshold
        self._route(node.left, q, idx[go_left], out)
        self._route(node.right, q, idx[~go_left], out)

    def depth(self):
        def walk(node):
            return 0 if node.left is None else 1 + max(walk(node.left), walk(node.right))
        return walk(self.root_)


def best_split(x, y, min_leaf):
    """Lowest-SSE split ``(feature, threshold, sse)`` or None when no split helps.

    Ties prefer the lower feature index, then the lower threshold.
    """
    n, n_feat = x.shape
    parent = float(np.sum((y - y.mean(axis=0)) ** 2))
    if parent <= 0:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]                      # n x F x D
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(np.sum(ys * ys, axis=2), axis=0)
    total, total_sq = csum[-1], csq[-1]
    n_left = np.arange(1, n)[:, None]
    left_sum, left_sq = csum[:-1], csq[:-1]
    sse_left = left_sq - np.sum(left_sum ** 2, axis=2) / n_left
    right_sum = total - left_sum
    sse_right = (total_sq - left_sq) - np.sum(right_sum ** 2, axis=2) / (n - n_left)
    sse = sse_left + sse_right
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    sse = np.where(valid, sse, np.inf)
    # scan feature-major so ties resolve to the lowest feature, then lowest position
    flat = sse.T.ravel()
    best = int(np.argmin(flat))
    if not np.isfinite(flat[best]) or flat[best] >= parent * (1 - 1e-12):
        return None
    f, i = divmod(best, n - 1)
    lo, hi = xs[i, f], xs[i + 1, f]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        # adjacent floats: the midpoint rounds onto the upper value
        thr = lo
    return f, float(thr), float(flat[best])


def knn_fit(features, targets, k=5):
    return KNNRegressor(k).fit(features, targets)


def knn_predict(model, query):
    return model.predict(query)


def tree_fit(features, targets, max_depth=12, min_leaf=5):
    return TreeRegressor(max_depth, min_leaf).fit(features, targets)


def tree_predict(model, query):
    return model.predict(query)


# --- experiments ----------------------------------------------------------------

MODELS = ("knn", "tree")


def make_regressor(name, config):
    if name == "knn":
        return KNNRegressor(config.knn_k)
    if name == "tree":
        return TreeRegressor(config.tree_max_depth, config.tree_min_leaf)
    raise ConfigError(f"unknown model {name!r}; choose from {MODELS}")


@dataclass
class ExperimentResult:
    parameter: str
    values: list
    records: list = field(default_factory=list)   # (value, model, seed, r2)
    config: dict = field(default_factory=dict)

    def table(self, model, stat=np.median):
        """Per-sweep-value statistic of R² over seeds for one model."""
        return [float(stat([r for v, m, _, r in self.records if m == model and v == value]))
                for value in self.values]

    def models(self):
        return sorted({m for _, m, _, _ in self.records})


def dataset_features(split, config, model):
    layout = FeatureLayout(n_samples=model.n_samples, samples_per_cycle=model.samples_per_cycle,
                           wavelet_levels=config.wavelet_levels, vi_points=config.vi_points)
    v = generate_voltage_reference(config.mains_frequency_hz, model.sample_rate_hz, model.n_samples,
                                   config.voltage_amplitude)
    return (feature_matrix(split.train.x_a.data, v, layout), split.train.p_a,
            feature_matrix(split.test.x_a.data, v, layout), split.test.p_a)


def evaluate_config(config, model, models=MODELS):
    """Generate one dataset, fit every baseline on train and score R² on test."""
    split = make_datasets(config, model=model)
    x_tr, y_tr, x_te, y_te = dataset_features(split, config, model)
    return {name: r2_score(y_te, make_regressor(name, config).fit(x_tr, y_tr).predict(x_te))
            for name in models}


def run_sweep(parameter, values, base_config, model, models=MODELS, seeds=(0,), apply=None):
    values = list(values)
    if not values:
        raise ConfigError(f"empty sweep over {parameter}")
    for name in models:
        if name not in MODELS:
            raise ConfigError(f"unknown model {name!r}; choose from {MODELS}")
    result = ExperimentResult(parameter, values, config=base_config.as_dict())
    for value in values:
        for seed in seeds:
            changes = apply(value) if apply else {parameter: value}
            cfg = base_config.replace(seed=int(seed), **changes)
            for name, r2 in evaluate_config(cfg, model, models).items():
                result.records.append((value, name, int(seed), r2))
    return result


def run_separability_experiment(base_config, eps_values, model, models=MODELS, seeds=(0,)):
    """Sweep the class separability, everything else fixed."""
    return run_sweep("separability", eps_values, base_config, model, models, seeds)


def run_concurrency_experiment(base_config, k_values, model, models=MODELS, seeds=(0,)):
    """Sweep the number of simultaneously active appliances (k_min = k_max = k)."""
    return run_sweep("k", k_values, base_config, model, models, seeds,
                     apply=lambda k: {"k_min": int(k), "k_max": int(k)})


def run_brand_experiment(base_config, tau_values, model, models=MODELS, seeds=(0,)):
    """Sweep the share of brands seen in training under a brand split."""
    if base_config.brands_per_class < 2:
        raise ConfigError("brand experiment needs brands_per_class >= 2")
    base = base_config.replace(split_mode="brand")
    return run_sweep("tau", tau_values, base, model, models, seeds)


# Base settings and sweep values per experiment. Centroid bounds of (0, 1) keep
# separability a graded knob; the model's own bounds (hundreds of units wide)
# separate every class as soon as eps > 0.
_BOUNDS = {"latent_bound_min": 0.0, "latent_bound_max": 1.0}
EXPERIMENTS = {
    "separability": ({**_BOUNDS, "n_aggregate": 600}, (0.0, 0.5, 1.0, 2.0)),
    "concurrency": ({**_BOUNDS, "n_classes": 8, "n_aggregate": 1000}, (2, 4, 6, 8, 10)),
    "brand": ({**_BOUNDS, "brands_per_class": 10, "k_min": 1, "k_max": 2, "n_aggregate": 600,
               "split_mode": "brand"}, (0.9, 0.7, 0.5, 0.3)),
}


def run_experiment(name, base_config, model, values=None, models=MODELS, seeds=(0,)):
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    values = EXPERIMENTS[name][1] if values is None else values
    runner = {"separability": run_separability_experiment, "concurrency": run_concurrency_experiment,
              "brand": run_brand_experiment}[name]
    return runner(base_config, values, model, models, seeds)


def count_inversions(values, direction="increasing"):
    """Adjacent pairs that break the expected monotone trend."""
    d = np.diff(np.asarray(values, dtype=np.float64))
    return int(np.sum(d < 0) if direction == "increasing" else np.sum(d > 0))

