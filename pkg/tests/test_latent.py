import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hfsg.errors import DimensionError, FormatError, ValidationError
from hfsg.latent import (LatentMatrix, components_for_variance, fit_pca, fix_signs, load_model, project,
                         reconstruct, reconstruction_mae, save_model)
from hfsg.signalio import SignatureMatrix


def _sm(data):
    return SignatureMatrix(np.asarray(data, dtype=float), 1000.0, 1)


def test_identical_rows_project_to_zero():
    x = _sm(np.tile([1.0, 2.0, -3.0], (4, 1)))
    m = fit_pca(x, 1)
    np.testing.assert_array_equal(project(m, x).z, 0.0)
    assert reconstruction_mae(x, reconstruct(m, project(m, x))) == 0.0
    assert m.sigma_r[0] == 0.0


def test_two_axis_case():
    x = _sm([[1, 0], [-1, 0], [2, 0], [-2, 0]])
    m = fit_pca(x, 2)
    np.testing.assert_allclose(m.explained_variance_ratio, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(m.w_r[0], [1.0, 0.0], atol=1e-15)


def test_mean_row_and_orthonormality(short_corpus, short_model):
    np.testing.assert_allclose(short_model.mean_row, short_corpus.data.mean(axis=0))
    np.testing.assert_allclose(short_model.w_r @ short_model.w_r.T, np.eye(8), atol=1e-8)
    evr = short_model.explained_variance_ratio
    assert np.all(evr >= 0) and np.all(np.diff(evr) <= 0) and evr.sum() <= 1 + 1e-12
    assert np.all(short_model.z_min <= short_model.z_max)
    assert np.all(short_model.sigma_r > 0)


def test_sign_convention(short_model):
    idx = np.argmax(np.abs(short_model.w_r), axis=1)
    assert np.all(short_model.w_r[np.arange(8), idx] > 0)


def test_fix_signs_flips_rows():
    out = fix_signs(np.array([[0.1, -0.9], [0.5, 0.2]]))
    np.testing.assert_array_equal(out, [[-0.1, 0.9], [0.5, 0.2]])


def test_fit_is_deterministic(short_corpus):
    a, b = fit_pca(short_corpus, 5), fit_pca(short_corpus, 5)
    assert a.w_r.tobytes() == b.w_r.tobytes()


def test_project_matches_naive_product(short_model):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, short_model.n_samples))
    z = project(short_model, _sm(x)).z
    w, mu = short_model.w_r, short_model.mean_row
    naive = np.zeros((3, short_model.n_components))
    for i in range(3):
        for j in range(short_model.n_components):
            acc = 0.0
            for t in range(short_model.n_samples):
                acc += (x[i, t] - mu[t]) * w[j, t]
            naive[i, j] = acc
    np.testing.assert_allclose(z, naive, atol=1e-10)


def test_project_of_mean_row_is_zero(short_model):
    z = project(short_model, _sm(np.tile(short_model.mean_row, (2, 1)))).z
    np.testing.assert_allclose(z, 0.0, atol=1e-12)
    assert np.all(project(short_model, _sm(short_model.mean_row[None])).y_g == -1)


@given(hnp.arrays(np.float64, (4, 8), elements=st.floats(-100, 100)))
@settings(max_examples=30, deadline=None)
def test_round_trip_latent(short_model, z):
    back = project(short_model, reconstruct(short_model, z)).z
    np.testing.assert_allclose(back, z, atol=1e-8)


def test_reconstruct_basis_vectors(short_model):
    e = np.eye(8)
    out = reconstruct(short_model, e).data
    np.testing.assert_allclose(out, short_model.w_r + short_model.mean_row, atol=1e-12)
    np.testing.assert_array_equal(reconstruct(short_model, np.zeros((1, 8))).data[0], short_model.mean_row)


def test_full_rank_round_trip_exact():
    rng = np.random.default_rng(1)
    x = _sm(rng.normal(size=(5, 12)))
    m = fit_pca(x, 4)   # rank of the centred 5-row matrix is 4
    np.testing.assert_allclose(reconstruct(m, project(m, x)).data, x.data, atol=1e-8)


def test_mae_non_increasing_in_l(short_corpus):
    maes = []
    for l in (1, 2, 4, 8, 16):
        m = fit_pca(short_corpus, l)
        maes.append(reconstruction_mae(short_corpus, reconstruct(m, project(m, short_corpus))))
    assert all(b <= a + 1e-12 for a, b in zip(maes, maes[1:]))


def test_mae_hand_cases():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert reconstruction_mae(x, x) == 0.0
    assert reconstruction_mae(x, x + 0.5) == 0.5
    assert reconstruction_mae(x, np.array([[2.0, 2.0], [3.0, 2.0]])) == 0.75
    with pytest.raises(DimensionError):
        reconstruction_mae(x, x[:1])


def test_variance_threshold_selects_l():
    evr = np.array([0.6, 0.3, 0.09, 0.01])
    assert components_for_variance(evr, 0.9) == 2
    assert components_for_variance(evr, 0.99) == 3
    assert components_for_variance(evr, 1.0) == 4


def test_fit_errors():
    x = _sm(np.random.default_rng(2).normal(size=(3, 4)))
    with pytest.raises(DimensionError):
        fit_pca(x, 4)
    with pytest.raises(DimensionError):
        fit_pca(x, 0)
    with pytest.raises(ValidationError):
        fit_pca(_sm([[1.0, 2.0]]), 1)
    with pytest.raises(DimensionError):
        project(fit_pca(x, 2), np.ones((1, 5)))
    with pytest.raises(DimensionError):
        reconstruct(fit_pca(x, 2), np.ones((1, 3)))


def test_latent_matrix_label_lengths():
    with pytest.raises(DimensionError):
        LatentMatrix(np.zeros((3, 2)), y_g=np.zeros(2))


def test_model_file_round_trip(tmp_path, short_model):
    path = tmp_path / "m.pcamod"
    save_model(short_model, path)
    back = load_model(path)
    for name in ("mean_row", "w_r", "sigma_r", "z_min", "z_max", "explained_variance_ratio"):
        assert getattr(back, name).tobytes() == getattr(short_model, name).tobytes()
    assert back.samples_per_cycle == short_model.samples_per_cycle
    assert path.read_bytes()[:6] == b"PCAMOD"


def test_model_file_corruption(tmp_path, short_model):
    path = tmp_path / "m.pcamod"
    save_model(short_model, path)
    buf = path.read_bytes()
    path.write_bytes(buf[:-8])
    with pytest.raises(FormatError):
        load_model(path)
    path.write_bytes(b"garbage")
    with pytest.raises(FormatError):
        load_model(path)
    path.write_bytes(buf[:40] + b"BOGUS\0\0\0" + buf[48:])
    with pytest.raises(FormatError, match="unknown section"):
        load_model(path)
