"""PCA latent space: fitting, projection, reconstruction and persistence."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, ValidationError
from .signalio import HEADER, SignatureMatrix, _decode_header, _encode_header, _frozen

UNSET = -1

PCAMOD_MAGIC = b"PCAMOD"
_SECTION = struct.Struct("<8sQ")
_TAGS = ("MEANROW", "W_R", "SIGMA_R", "Z_MIN", "Z_MAX", "EVR")


@dataclass(frozen=True)
class ReconstructionModel:
    mean_row: np.ndarray
    w_r: np.ndarray
    sigma_r: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray
    explained_variance_ratio: np.ndarray
    sample_rate_hz: float = 30000.0
    samples_per_cycle: int = 500

    def __post_init__(self):
        for name in ("mean_row", "w_r", "sigma_r", "z_min", "z_max", "explained_variance_ratio"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        l, t = self.w_r.shape
        if self.mean_row.shape != (t,):
            raise DimensionError(f"mean_row has shape {self.mean_row.shape}, expected ({t},)")
        for name in ("sigma_r", "z_min", "z_max", "explained_variance_ratio"):
            if getattr(self, name).shape != (l,):
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected ({l},)")

    @property
    def n_components(self):
        return self.w_r.shape[0]

    @property
    def n_samples(self):
        return self.w_r.shape[1]


@dataclass(frozen=True)
class LatentMatrix:
    z: np.ndarray
    y_g: np.ndarray = None
    y_class: np.ndarray = None
    y_brand: np.ndarray = None

    def __post_init__(self):
        z = _frozen(self.z)
        if z.ndim != 2:
            raise DimensionError(f"latent matrix must be 2-D, got shape {z.shape}")
        n = z.shape[0]
        object.__setattr__(self, "z", z)
        for name in ("y_g", "y_class", "y_brand"):
            y = getattr(self, name)
            y = np.full(n, UNSET, dtype=np.int64) if y is None else _frozen(y, np.int64)
            if y.shape != (n,):
                raise DimensionError(f"{name} has length {y.shape}, expected {n}")
            object.__setattr__(self, name, y)

    def __len__(self):
        return self.z.shape[0]

    def with_z(self, z):
        return LatentMatrix(z, self.y_g, self.y_class, self.y_brand)


def fix_signs(components):
    """Flip each row so that its largest-magnitude entry is positive."""
    if components.size == 0:
        return components
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def _thin_svd(xc):
    # LAPACK gesdd on the N x T matrix costs O(min(N,T)^2 max(N,T)); no T x T work
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    return s, fix_signs(vt)


def components_for_variance(explained_variance_ratio, threshold):
    """Smallest L whose cumulative explained variance reaches ``threshold``."""
    cum = np.cumsum(explained_variance_ratio)
    l = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    return min(l, len(explained_variance_ratio))


def fit_pca(x, n_components=50, variance_threshold=None):
    """Fit the latent space on real signatures ``x``.

    When ``variance_threshold`` is given it overrides ``n_components``: the
    smallest L reaching that cumulative explained variance is used.
    """
    data = np.asarray(x.data, dtype=np.float64)
    n, t = data.shape
    if n < 2:
        raise ValidationError(f"need at least 2 signatures to fit PCA, got {n}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("input contains non-finite values")
    mean = data.mean(axis=0)
    xc = data - mean
    s, vt = _thin_svd(xc)
    var = s * s
    total = var.sum()
    evr_all = var / total if total > 0 else np.zeros_like(var)

    if variance_threshold is not None:
        if not 0 < variance_threshold <= 1:
            raise ValidationError(f"variance_threshold must be in (0, 1], got {variance_threshold}")
        n_components = components_for_variance(evr_all, variance_threshold)
    if not 1 <= n_components <= min(n, t):
        raise DimensionError(f"n_components={n_components} outside [1, min(N, T)] = [1, {min(n, t)}]")

    w = vt[:n_components]
    z = xc @ w.T
    return ReconstructionModel(
        mean_row=mean,
        w_r=w,
        sigma_r=z.std(axis=0, ddof=1),
        z_min=z.min(axis=0),
        z_max=z.max(axis=0),
        explained_variance_ratio=evr_all[:n_components],
        sample_rate_hz=x.sample_rate_hz,
        samples_per_cycle=x.samples_per_cycle,
    )


def project(model, x):
    """Latent coordinates ``(x - mean) W^T``; labels left unset."""
    data = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.n_samples:
        raise DimensionError(f"expected rows of length {model.n_samples}, got shape {data.shape}")
    return LatentMatrix((data - model.mean_row) @ model.w_r.T)


def reconstruct(model, z):
    zz = np.asarray(getattr(z, "z", z), dtype=np.float64)
    if zz.ndim != 2 or zz.shape[1] != model.n_components:
        raise DimensionError(f"expected {model.n_components} latent columns, got shape {zz.shape}")
    return SignatureMatrix(zz @ model.w_r + model.mean_row, model.sample_rate_hz, model.samples_per_cycle)


def reconstruction_mae(x, x_hat):
    """Mean absolute error over all N*T entries."""
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    b = np.asarray(getattr(x_hat, "data", x_hat), dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


# --- PCAMOD persistence ---------------------------------------------------------

def save_model(model, path):
    """Write ``model`` as a PCAMOD container of tagged binary64 sections."""
    l, t = model.w_r.shape
    parts = [_encode_header(PCAMOD_MAGIC, l, t, model.sample_rate_hz, model.samples_per_cycle)]
    for tag, arr in zip(_TAGS, _model_arrays(model)):
        values = np.ascontiguousarray(arr, dtype="<f8").ravel()
        parts.append(_SECTION.pack(tag.encode("ascii").ljust(8, b"\0"), values.size))
        parts.append(values.tobytes())
    Path(path).write_bytes(b"".join(parts))


def _model_arrays(model):
    return (model.mean_row, model.w_r, model.sigma_r, model.z_min, model.z_max,
            model.explained_variance_ratio)


def load_model(path):
    buf = Path(path).read_bytes()
    l, t, rate, spc = _decode_header(buf, PCAMOD_MAGIC)
    if l < 1 or t < 1 or l * t > 2**59:
        raise FormatError(f"invalid model dimensions {l} x {t}", offset=8)
    expected = {"MEANROW": t, "W_R": l * t, "SIGMA_R": l, "Z_MIN": l, "Z_MAX": l, "EVR": l}
    sections = {}
    pos = HEADER.size
    while pos < len(buf):
        if pos + _SECTION.size > len(buf):
            raise FormatError("truncated section header", offset=pos)
        raw_tag, count = _SECTION.unpack_from(buf, pos)
        tag = raw_tag.rstrip(b"\0").decode("ascii", errors="replace")
        if tag not in expected:
            raise FormatError(f"unknown section tag {tag!r}", offset=pos)
        if tag in sections:
            raise FormatError(f"duplicate section {tag!r}", offset=pos)
        if count != expected[tag]:
            raise FormatError(f"section {tag} holds {count} values, expected {expected[tag]}", offset=pos + 8)
        pos += _SECTION.size
        end = pos + 8 * count
        if end > len(buf):
            raise FormatError(f"truncated payload in section {tag}", offset=len(buf))
        sections[tag] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos = end
    missing = [tag for tag in _TAGS if tag not in sections]
    if missing:
        raise FormatError(f"missing sections {missing}", offset=len(buf))
    if not all(np.all(np.isfinite(a)) for a in sections.values()):
        raise FormatError("model contains non-finite values", offset=HEADER.size)
    return ReconstructionModel(
        mean_row=sections["MEANROW"], w_r=sections["W_R"].reshape(l, t), sigma_r=sections["SIGMA_R"],
        z_min=sections["Z_MIN"], z_max=sections["Z_MAX"], explained_variance_ratio=sections["EVR"],
        sample_rate_hz=rate, samples_per_cycle=spc)

