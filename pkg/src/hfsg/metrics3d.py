"""Alpha-precision, beta-recall and authenticity of synthetic signatures.

Both clouds live in the fitted PCA latent space; each cloud's support balls
are centred on its own centroid and their radii are quantiles (linear
interpolation between order statistics) of the cloud's own radii.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .latent import project

# float64 entries allowed in one (queries x refs x dim) difference block
_BLOCK = 1 << 22


@dataclass(frozen=True)
class EmbeddedCloud:
    points: np.ndarray
    center: np.ndarray
    radii: np.ndarray

    @classmethod
    def from_points(cls, points):
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if p.shape[0] == 0:
            raise ValidationError("cannot embed an empty point set")
        center = p.mean(axis=0)
        return cls(p, center, np.linalg.norm(p - center, axis=1))

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class MetricReport:
    alphas: np.ndarray
    p_alpha_curve: np.ndarray
    r_beta_curve: np.ndarray
    authenticity: float
    ip_alpha: float
    ir_beta: float
    knn_k: int

    def rows(self):
        """Long-format ``(name, grid, value)`` rows used for CSV output."""
        out = [("p_alpha", a, p) for a, p in zip(self.alphas, self.p_alpha_curve)]
        out += [("r_beta", b, r) for b, r in zip(self.alphas, self.r_beta_curve)]
        out += [("authenticity", None, self.authenticity), ("ip_alpha", None, self.ip_alpha),
                ("ir_beta", None, self.ir_beta), ("knn_k", None, self.knn_k)]
        return out


def default_grid(step=0.01):
    n = int(round(1.0 / step))
    return np.linspace(0.0, 1.0, n + 1)


def embed(x_r, x_g, model):
    """Project real and synthetic signatures through the model's PCA."""
    if x_r.n_rows == 0 or x_g.n_rows == 0:
        raise ValidationError("empty input")
    return (EmbeddedCloud.from_points(project(model, x_r).z),
            EmbeddedCloud.from_points(project(model, x_g).z))


def _chunk(refs):
    return max(1, _BLOCK // max(1, refs.shape[0] * refs.shape[1]))


def _pairwise_min(queries, refs, exclude_self=False):
    """Distance from each query to its nearest reference point (chunked)."""
    out = np.empty(len(queries))
    step = _chunk(refs)
    for s in range(0, len(queries), step):
        d = _dist(queries[s:s + step], refs)
        if exclude_self:
            d[np.arange(d.shape[0]), np.arange(s, s + d.shape[0])] = np.inf
        out[s:s + step] = d.min(axis=1)
    return out


def _dist(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def _kth_neighbour(points, k):
    out = np.empty(len(points))
    step = _chunk(points)
    for s in range(0, len(points), step):
        d = _dist(points[s:s + step], points)
        d[np.arange(d.shape[0]), np.arange(s, s + d.shape[0])] = np.inf
        out[s:s + step] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


def _check_grid(grid):
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or np.any(g < 0) or np.any(g > 1) or np.any(np.diff(g) < 0):
        raise ConfigError("grid must be sorted values in [0, 1]")
    return g


def alpha_precision_curve(real, synth, alphas):
    """Fraction of synthetic points inside the real alpha-support ball, per alpha."""
    alphas = _check_grid(alphas)
    if real.points.shape[1] != synth.points.shape[1]:
        raise DimensionError("clouds have different dimensions")
    r_alpha = np.quantile(real.radii, alphas)
    d = np.linalg.norm(synth.points - real.center, axis=1)
    return (d[None, :] <= r_alpha[:, None]).mean(axis=1)


def beta_recall_curve(real, synth, betas, k=5):
    """Fraction of real points covered by their nearest beta-support synthetic point.

    A real point is covered when that synthetic point lies within the distance
    to the real point's k-th nearest real neighbour. The beta=0 support is a
    zero-mass ball and counts as empty.
    """
    betas = _check_grid(betas)
    n_real = len(real)
    if not 1 <= k < n_real:
        raise ConfigError(f"k={k} must satisfy 1 <= k < number of real points ({n_real})")
    if real.points.shape[1] != synth.points.shape[1]:
        raise DimensionError("clouds have different dimensions")
    ball = _kth_neighbour(real.points, k)

    # synthetic points ordered by radius; the beta-support is a prefix of that order
    order = np.argsort(synth.radii, kind="stable")
    sorted_synth = synth.points[order]
    q = np.quantile(synth.radii, betas)
    n_in = np.searchsorted(synth.radii[order], q, side="right")
    n_in[betas <= 0] = 0

    covered = np.zeros((len(betas), n_real), dtype=bool)
    step = _chunk(sorted_synth)
    for s in range(0, n_real, step):
        nearest = np.minimum.accumulate(_dist(real.points[s:s + step], sorted_synth), axis=1)
        for i, m in enumerate(n_in):
            if m > 0:
                covered[i, s:s + step] = nearest[:, m - 1] <= ball[s:s + step]
    return covered.mean(axis=1)


def authenticity(real, synth):
    """Share of real points whose nearest other real point is strictly closer than any synthetic one."""
    if len(real) < 2 or len(synth) < 1:
        raise ValidationError("authenticity needs >= 2 real and >= 1 synthetic points")
    d_real = _pairwise_min(real.points, real.points, exclude_self=True)
    d_synth = _pairwise_min(real.points, synth.points)
    return float(np.mean(d_real < d_synth))


def integrated_metrics(alphas, p_alpha_curve, betas, r_beta_curve):
    """``IP = 1 - 2 * int |P - a| da`` and likewise for recall (trapezoid rule), clamped to [0, 1]."""
    def score(grid, curve):
        grid = np.asarray(grid, dtype=np.float64)
        gap = np.abs(np.asarray(curve, dtype=np.float64) - grid)
        delta = float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(grid)))
        return float(np.clip(1.0 - 2.0 * delta, 0.0, 1.0))
    return score(alphas, p_alpha_curve), score(betas, r_beta_curve)


def evaluate_clouds(real, synth, k=5, grid=None):
    grid = default_grid() if grid is None else _check_grid(grid)
    p = alpha_precision_curve(real, synth, grid)
    r = beta_recall_curve(real, synth, grid, k)
    ip, ir = integrated_metrics(grid, p, grid, r)
    return MetricReport(grid, p, r, authenticity(real, synth), ip, ir, int(k))


def evaluate(x_r, x_g, model, k=5, grid=None):
    real, synth = embed(x_r, x_g, model)
    return evaluate_clouds(real, synth, k, grid)
