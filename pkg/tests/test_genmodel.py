import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsg.errors import ConfigError, HfsgWarning
from hfsg.genmodel import (GenerationConfig, align_latent, blob_specs, gbm, kmeans, make_submetered,
                           sample_covariance)
from hfsg.latent import LatentMatrix
from hfsg.rng import stream

UNIT = (0.0, 1.0)


def test_covariance_scalar_case():
    cov = sample_covariance(1, 3, 2.0, np.random.default_rng(0))
    assert cov.shape == (1, 1)
    assert cov[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-15)


@given(st.integers(1, 12), st.integers(1, 5), st.floats(0.01, 10.0), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_covariance_trace_and_symmetry(l, m, sigma, seed):
    cov = sample_covariance(l, m, sigma, np.random.default_rng(seed))
    assert np.trace(cov) * m / sigma ** 2 == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(cov, cov.T, atol=1e-10)
    assert np.linalg.eigvalsh(cov).min() >= -1e-12


def test_covariance_3x3_factorizes():
    cov = sample_covariance(3, 2, 2.0, stream(42, "cov"))
    np.linalg.cholesky(cov)
    assert np.linalg.eigvalsh(cov).min() >= -1e-12


def test_covariance_rejects_bad_args():
    with pytest.raises(ConfigError):
        sample_covariance(0, 1, 1.0, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        sample_covariance(2, 1, 0.0, np.random.default_rng(0))


def test_gbm_single_cluster():
    z = gbm(GenerationConfig(n_samples=4, n_classes=1, modes_per_class=1, latent_bounds=UNIT), 3)
    assert z.z.shape == (4, 3)
    assert np.all(z.y_g == 0)


def test_gbm_floor_distribution():
    cfg = GenerationConfig(n_samples=100, n_classes=2, modes_per_class=3, latent_bounds=UNIT)
    z = gbm(cfg, 4)
    assert len(z) == 96 == cfg.effective_samples
    assert np.array_equal(np.bincount(z.y_g), [16] * 6)


def test_gbm_zero_samples_per_cluster():
    # N < D*M would leave clusters empty; it is rejected before sampling
    with pytest.raises(ConfigError):
        GenerationConfig(n_samples=4, n_classes=5, modes_per_class=1, latent_bounds=UNIT)


def test_zero_separability_centroids_at_origin():
    # Monte-Carlo bound: every per-cluster sample mean lies within 4 sigma_k / sqrt(M n)
    for seed in range(30):
        cfg = GenerationConfig(n_samples=120, n_classes=3, modes_per_class=2, separability=0.0,
                               latent_bounds=(-5.0, 5.0), seed=seed)
        specs = blob_specs(cfg, 3)
        z = gbm(cfg, 3)
        for k, spec in enumerate(specs):
            assert np.all(spec.centroid == 0.0)
            n = cfg.samples_per_cluster
            bound = 4 * spec.spread / (np.sqrt(cfg.modes_per_class) * np.sqrt(n))
            assert np.all(np.abs(z.z[z.y_g == k].mean(axis=0)) <= bound)


def test_centroids_scale_with_separability():
    base = GenerationConfig(n_samples=40, n_classes=4, separability=1.0, latent_bounds=UNIT, seed=9)
    c1 = np.array([s.centroid for s in blob_specs(base, 5)])
    for c in (0.5, 2.0, 7.0):
        scaled = GenerationConfig(n_samples=40, n_classes=4, separability=c, latent_bounds=UNIT, seed=9)
        np.testing.assert_allclose([s.centroid for s in blob_specs(scaled, 5)], c * c1, rtol=1e-14)


def test_mean_centroid_distance_monotone_in_eps():
    dists = []
    for eps in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0):
        cfg = GenerationConfig(n_samples=40, n_classes=4, separability=eps, latent_bounds=UNIT, seed=3)
        c = np.array([s.centroid for s in blob_specs(cfg, 6)])
        d = np.linalg.norm(c[:, None] - c[None], axis=2)
        dists.append(d[np.triu_indices(4, 1)].mean())
    assert all(b >= a for a, b in zip(dists, dists[1:]))


def test_per_cluster_streams_independent_of_cluster_count():
    a = blob_specs(GenerationConfig(n_samples=40, n_classes=2, latent_bounds=UNIT, seed=1), 3)
    b = blob_specs(GenerationConfig(n_samples=40, n_classes=4, latent_bounds=UNIT, seed=1), 3)
    np.testing.assert_array_equal(a[1].covariance, b[1].covariance)


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_align_matches_sigma_r(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(60, 4)) @ rng.normal(size=(4, 4))
    sigma_r = rng.uniform(0.5, 5.0, size=4)
    out = align_latent(LatentMatrix(z), sigma_r).z
    np.testing.assert_allclose(out.std(axis=0, ddof=1), sigma_r, rtol=1e-6)


def test_align_decorrelates_two_blob_toy():
    rng = np.random.default_rng(5)
    cov = np.array([[2.0, 1.8], [1.8, 2.0]])
    z = np.vstack([rng.multivariate_normal([0, 0], cov, 50), rng.multivariate_normal([3, 3], cov, 50)])
    out = align_latent(LatentMatrix(z), np.array([1.0, 0.5])).z
    c = np.cov(out, rowvar=False)
    assert abs(c[0, 1]) < 1e-8


def test_align_fixed_point_up_to_sign():
    rng = np.random.default_rng(6)
    z = rng.normal(size=(200, 3))
    z -= z.mean(axis=0)
    # make it exactly axis-aligned: rotate onto its own principal axes first
    _, _, vt = np.linalg.svd(z, full_matrices=False)
    z = z @ vt.T
    sigma = z.std(axis=0, ddof=1)
    out = align_latent(LatentMatrix(z), sigma).z
    np.testing.assert_allclose(np.abs(out), np.abs(z), atol=1e-10)


def test_align_degenerate_column_warns():
    z = np.column_stack([np.arange(5.0), np.zeros(5)])
    with pytest.warns(HfsgWarning):
        out = align_latent(LatentMatrix(z), np.array([1.0, 1.0])).z
    assert np.all(out[:, 1] == 0.0)


def test_kmeans_single_cluster():
    assert np.all(kmeans(np.random.default_rng(0).normal(size=(9, 2)), 1, stream(0, "k")) == 0)


def test_kmeans_duplicate_pairs():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]])
    labels = kmeans(pts, 2, stream(0, "k"))
    assert labels[0] == labels[1] != labels[2] == labels[3]


def _wcss(points, labels, k):
    return sum(((points[labels == j] - points[labels == j].mean(axis=0)) ** 2).sum()
               for j in range(k) if np.any(labels == j))


def test_kmeans_matches_exhaustive_partition():
    rng = np.random.default_rng(11)
    centers = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
    pts = np.vstack([c + 0.3 * rng.normal(size=(4, 2)) for c in centers])
    # oracle: every assignment of 12 points to 3 labels
    grid = np.indices((3,) * 12).reshape(12, -1).T
    onehot = np.eye(3)[grid]                            # (3^12, 12, 3)
    counts = onehot.sum(axis=1)
    sums = np.einsum("pnk,nd->pkd", onehot, pts)
    sq = onehot.transpose(0, 2, 1) @ (pts ** 2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        wcss = np.where(counts > 0, sq - (sums ** 2).sum(axis=2) / counts, 0.0).sum(axis=1)
    best = wcss.min()
    labels = kmeans(pts, 3, stream(0, "k"))
    assert _wcss(pts, labels, 3) == pytest.approx(best, rel=1e-9)


def test_kmeans_nonempty_clusters():
    pts = np.vstack([np.zeros((8, 2)), [[1.0, 1.0]]])
    labels = kmeans(pts, 3, stream(1, "k"))
    assert set(labels.tolist()) == {0, 1, 2}


def test_kmeans_k_exceeds_rows():
    with pytest.raises(ConfigError):
        kmeans(np.zeros((2, 2)), 3, stream(0, "k"))


def test_make_submetered_labels(short_model):
    cfg = GenerationConfig(n_samples=80, n_classes=2, modes_per_class=2, brands_per_class=2)
    lat = make_submetered(cfg, short_model)
    assert len(lat) == 80
    assert np.array_equal(np.bincount(lat.y_class), [40, 40])
    np.testing.assert_array_equal(lat.y_class, lat.y_g // 2)
    for k in range(4):
        assert set(lat.y_brand[lat.y_g == k].tolist()) == {0, 1}


def test_make_submetered_deterministic(short_model):
    cfg = GenerationConfig(n_samples=60, n_classes=3, brands_per_class=3, seed=17)
    a, b = make_submetered(cfg, short_model), make_submetered(cfg, short_model)
    assert a.z.tobytes() == b.z.tobytes()
    assert np.array_equal(a.y_brand, b.y_brand)


def test_make_submetered_clamps_brands(short_model):
    cfg = GenerationConfig(n_samples=6, n_classes=3, brands_per_class=3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lat = make_submetered(cfg, short_model)
    assert any(issubclass(w.category, HfsgWarning) for w in caught)
    assert lat.y_brand.max() <= 1


def test_generation_config_invariants():
    with pytest.raises(ConfigError):
        GenerationConfig(n_samples=3, n_classes=2, modes_per_class=2)
    with pytest.raises(ConfigError):
        GenerationConfig(sigma_bounds=(2.0, 1.0))
    with pytest.raises(ConfigError):
        GenerationConfig(brands_per_class=0)
