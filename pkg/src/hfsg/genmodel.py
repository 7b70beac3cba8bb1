"""Labeled synthetic latent signatures via Gaussian blob modeling.

Clusters are operational modes; ``modes_per_class`` consecutive clusters form
one appliance class, and each cluster is split into brands with k-means.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, HfsgWarning, ValidationError
from .latent import LatentMatrix, fix_signs
from .rng import stream


@dataclass(frozen=True)
class GenerationConfig:
    n_samples: int = 400
    n_classes: int = 4
    modes_per_class: int = 1
    brands_per_class: int = 2
    separability: float = 1.0
    sigma_bounds: tuple = (0.5, 1.5)
    # None -> use the model's z_min/z_max; otherwise scalars or length-L vectors
    latent_bounds: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_samples", "n_classes", "modes_per_class", "brands_per_class"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.separability < 0:
            raise ConfigError(f"separability must be non-negative, got {self.separability}")
        lo, hi = self.sigma_bounds
        if not 0 < lo <= hi:
            raise ConfigError(f"sigma_bounds must satisfy 0 < sigma_min <= sigma_max, got {self.sigma_bounds}")
        if self.n_samples < self.n_clusters:
            raise ConfigError(
                f"n_samples={self.n_samples} < n_classes*modes_per_class={self.n_clusters}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @property
    def n_clusters(self):
        return self.n_classes * self.modes_per_class

    @property
    def samples_per_cluster(self):
        return self.n_samples // self.n_clusters

    @property
    def effective_samples(self):
        return self.samples_per_cluster * self.n_clusters


@dataclass(frozen=True)
class BlobSpec:
    centroid: np.ndarray
    covariance: np.ndarray
    spread: float


def sample_covariance(l, m, sigma_k, rng):
    """Random covariance ``sigma_k^2 / m * S / tr(S)`` with ``S = P P^T``."""
    if l < 1 or m < 1 or not sigma_k > 0:
        raise ConfigError(f"invalid covariance parameters l={l}, m={m}, sigma_k={sigma_k}")
    for _ in range(2):
        p = rng.standard_normal((l, l))
        s = p @ p.T
        tr = np.trace(s)
        if tr > 0:
            break
    else:
        raise ValidationError("degenerate covariance draw: trace(P P^T) = 0 twice")
    cov = (sigma_k * sigma_k / m) * (s / tr)
    return 0.5 * (cov + cov.T)


def _bounds(config, l, z_min, z_max):
    if config.latent_bounds is not None:
        z_min, z_max = config.latent_bounds
    if z_min is None or z_max is None:
        raise ConfigError("latent bounds are required (from the model or latent_bounds)")
    lo = np.broadcast_to(np.asarray(z_min, dtype=np.float64), (l,))
    hi = np.broadcast_to(np.asarray(z_max, dtype=np.float64), (l,))
    if np.any(lo > hi):
        raise ConfigError("latent bounds must satisfy z_min <= z_max componentwise")
    return lo, hi


def blob_specs(config, l, z_min=None, z_max=None):
    """Centroid, covariance and spread of every cluster, deterministic in ``config.seed``."""
    if config.samples_per_cluster == 0:
        raise ConfigError(f"n_samples={config.n_samples} gives zero samples per cluster")
    lo, hi = _bounds(config, l, z_min, z_max)
    c = config.n_clusters
    centers = stream(config.seed, "gbm", "centroids").uniform(lo, hi, size=(c, l))
    centers = config.separability * (2.0 * centers - 1.0)
    specs = []
    for k in range(c):
        rng = stream(config.seed, "gbm", "cluster", k)
        sigma_k = rng.uniform(*config.sigma_bounds)
        cov = sample_covariance(l, config.modes_per_class, sigma_k, rng)
        specs.append(BlobSpec(centers[k], cov, float(sigma_k)))
    return specs


def _mvn(mean, cov, n, rng):
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            chol = np.linalg.cholesky(cov + 1e-12 * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            w, v = np.linalg.eigh(cov)
            chol = v * np.sqrt(np.clip(w, 0.0, None))
    return mean + rng.standard_normal((n, len(mean))) @ chol.T


def gbm(config, l, z_min=None, z_max=None):
    """Gaussian blobs: ``floor(N/C)`` rows per cluster, ``y_g`` = cluster index."""
    specs = blob_specs(config, l, z_min, z_max)
    n_k = config.samples_per_cluster
    z = np.empty((n_k * len(specs), l))
    for k, spec in enumerate(specs):
        z[k * n_k:(k + 1) * n_k] = _mvn(spec.centroid, spec.covariance, n_k,
                                        stream(config.seed, "gbm", "points", k))
    return LatentMatrix(z, y_g=np.repeat(np.arange(len(specs)), n_k))


def align_latent(z_g, sigma_r):
    """Rotate synthetic latents onto their own principal axes, then match the real scales.

    Column i ends with sample standard deviation ``sigma_r[i]``. Synthetic
    components with no variance are zeroed (with a warning).
    """
    z = np.asarray(z_g.z, dtype=np.float64)
    sigma_r = np.asarray(sigma_r, dtype=np.float64)
    n, l = z.shape
    if n == 0:
        raise ValidationError("cannot align an empty latent matrix")
    if sigma_r.shape != (l,):
        raise DimensionError(f"sigma_r has length {sigma_r.size}, latent matrix has {l} columns")
    zc = z - z.mean(axis=0)
    _, s, vt = np.linalg.svd(zc, full_matrices=False)
    w_g = np.zeros((l, l))
    w_g[: vt.shape[0]] = fix_signs(vt)
    out = zc @ w_g.T
    sigma_g = out.std(axis=0, ddof=1) if n > 1 else np.zeros(l)
    floor = 1e-12 * max(float(sigma_g.max(initial=0.0)), 1e-300)
    degenerate = sigma_g <= floor
    if np.any(degenerate):
        warnings.warn(f"{int(degenerate.sum())} synthetic latent component(s) have zero variance; "
                      "left at zero", HfsgWarning, stacklevel=2)
    scale = np.where(degenerate, 0.0, sigma_r / np.where(degenerate, 1.0, sigma_g))
    return z_g.with_z(out * scale)


def kmeans(points, k, rng, max_iter=300, tol=1e-6):
    """Lloyd's algorithm from a k-means++ start; returns labels in [0, k)."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must lie in [1, {n}]")
    # k-means++ seeding
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dist, axis=1)
        new = np.empty_like(centers)
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(dist[np.arange(n), labels]))
                new[j] = x[far]
                labels[far] = j
                dist[far] = 0.0
        shift = np.sqrt(np.max(np.sum((new - centers) ** 2, axis=1)))
        centers = new
        if shift < tol:
            break
    dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(dist, axis=1)
    # guarantee non-empty clusters on the final assignment too
    for j in range(k):
        if not np.any(labels == j):
            own = dist[np.arange(n), labels]
            counts = np.bincount(labels, minlength=k)
            own[counts[labels] <= 1] = -np.inf
            far = int(np.argmax(own))
            labels[far] = j
    return labels


def make_submetered(config, model):
    """Blobs -> latent alignment -> per-cluster brand k-means -> class labels."""
    l = model.n_components
    raw = gbm(config, l, model.z_min, model.z_max)
    aligned = align_latent(raw, model.sigma_r)
    y_g = aligned.y_g
    y_brand = np.zeros(len(y_g), dtype=np.int64)
    b = config.brands_per_class
    for k in np.unique(y_g):
        members = np.flatnonzero(y_g == k)
        k_eff = min(b, members.size)
        if k_eff < b:
            warnings.warn(f"cluster {k} has {members.size} rows; brand count clamped from {b} to {k_eff}",
                          HfsgWarning, stacklevel=2)
        y_brand[members] = kmeans(aligned.z[members], k_eff, stream(config.seed, "brands", int(k)))
    return LatentMatrix(aligned.z, y_g=y_g, y_class=y_g // config.modes_per_class, y_brand=y_brand)
