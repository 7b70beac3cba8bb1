"""NILM features of an aggregate current row against the voltage reference.

Every function works along the last axis, so it accepts a single row or an
``A x T`` matrix of rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, UndefinedFeatureError


@dataclass(frozen=True)
class FeatureLayout:
    n_samples: int = 30000
    samples_per_cycle: int = 500
    wavelet_levels: int = 8
    vi_points: int = 50
    # "energy" (sum of squares per period) or "rms"
    centroid_quantity: str = "energy"

    def __post_init__(self):
        if self.n_samples % self.samples_per_cycle:
            raise ConfigError(f"n_samples={self.n_samples} is not a multiple of "
                              f"samples_per_cycle={self.samples_per_cycle}")
        if self.wavelet_levels < 1 or 2 ** self.wavelet_levels > self.n_samples:
            raise ConfigError(f"wavelet_levels={self.wavelet_levels} too deep for {self.n_samples} samples")
        if self.vi_points < 1:
            raise ConfigError(f"vi_points must be >= 1, got {self.vi_points}")
        if self.centroid_quantity not in ("energy", "rms"):
            raise ConfigError(f"centroid_quantity must be 'energy' or 'rms', got {self.centroid_quantity!r}")

    @property
    def n_periods(self):
        return self.n_samples // self.samples_per_cycle

    @property
    def wavelet_bands(self):
        return self.wavelet_levels + 1

    @property
    def wavelet_samples(self):
        """Largest power-of-two prefix used by the Haar transform."""
        return 1 << (self.n_samples.bit_length() - 1)

    @property
    def size(self):
        return 2 + self.n_periods + self.wavelet_bands + 2 * self.vi_points + 1

    def names(self):
        return (["form_factor", "temporal_centroid"]
                + [f"aot_{p}" for p in range(1, self.n_periods + 1)]
                + [f"wavelet_d{j}" for j in range(1, self.wavelet_levels + 1)]
                + [f"wavelet_a{self.wavelet_levels}"]
                + [f"vi_v_{i}" for i in range(self.vi_points)]
                + [f"vi_i_{i}" for i in range(self.vi_points)]
                + ["phase_shift"])


@dataclass(frozen=True)
class FeatureVector:
    form_factor: float
    temporal_centroid: float
    admittance_over_time: np.ndarray
    wavelet_energy: np.ndarray
    vi_trajectory: np.ndarray
    phase_shift: float
    layout: FeatureLayout

    def flatten(self):
        return np.concatenate([[self.form_factor, self.temporal_centroid], self.admittance_over_time,
                               self.wavelet_energy, self.vi_trajectory.ravel(), [self.phase_shift]])


def _rms(x):
    return np.sqrt(np.mean(x * x, axis=-1))


def _require(mask, feature, message):
    if np.any(mask):
        where = "" if np.ndim(mask) == 0 else f" (rows {np.flatnonzero(mask)[:5].tolist()})"
        raise UndefinedFeatureError(feature, message + where)


def _voltage(v):
    return np.asarray(getattr(v, "samples", v), dtype=np.float64)


def _periods(x, samples_per_cycle):
    if x.shape[-1] % samples_per_cycle:
        raise DimensionError(f"row length {x.shape[-1]} is not a multiple of {samples_per_cycle}")
    return x.reshape(x.shape[:-1] + (x.shape[-1] // samples_per_cycle, samples_per_cycle))


def form_factor(x):
    """RMS over mean absolute value; 1 for a square wave, pi/(2 sqrt 2) for a sine."""
    x = np.asarray(x, dtype=np.float64)
    mean_abs = np.mean(np.abs(x), axis=-1)
    _require(mean_abs == 0, "form_factor", "all-zero current")
    return _rms(x) / mean_abs


def temporal_centroid(x, samples_per_cycle=500, quantity="energy"):
    """Energy-weighted mean period index, in [1, P]."""
    per = _periods(np.asarray(x, dtype=np.float64), samples_per_cycle)
    e = np.sum(per * per, axis=-1)
    if quantity == "rms":
        e = np.sqrt(e / samples_per_cycle)
    total = e.sum(axis=-1)
    _require(total == 0, "temporal_centroid", "zero total energy")
    p = np.arange(1, e.shape[-1] + 1)
    return (e * p).sum(axis=-1) / total


def admittance_over_time(x, v, samples_per_cycle=500):
    """Per-period RMS current over per-period RMS voltage."""
    x = np.asarray(x, dtype=np.float64)
    vs = _voltage(v)
    if vs.shape[-1] != x.shape[-1]:
        raise DimensionError(f"voltage length {vs.shape[-1]} != current length {x.shape[-1]}")
    v_rms = _rms(_periods(vs, samples_per_cycle))
    _require(v_rms == 0, "admittance_over_time", "zero-voltage period")
    return _rms(_periods(x, samples_per_cycle)) / v_rms


def haar_dwt(x, levels):
    """Haar detail bands (finest first) and the final approximation, along the last axis."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] % (1 << levels):
        raise ConfigError(f"length {a.shape[-1]} is not divisible by 2**{levels}")
    details = []
    s = np.sqrt(0.5)
    for _ in range(levels):
        even, odd = a[..., 0::2], a[..., 1::2]
        details.append((even - odd) * s)
        a = (even + odd) * s
    return details, a


def wavelet_energy(x, levels=8):
    """Energy of each Haar detail band plus the approximation band (``levels + 1`` values).

    Rows are truncated to their largest power-of-two prefix first.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if levels < 1 or (1 << levels) > n:
        raise ConfigError(f"levels={levels} too deep for {n} samples")
    prefix = 1 << (n.bit_length() - 1)
    details, approx = haar_dwt(x[..., :prefix], levels)
    bands = [np.sum(d * d, axis=-1) for d in details] + [np.sum(approx * approx, axis=-1)]
    return np.stack(bands, axis=-1)


def vi_trajectory(x, v, n_points=50, samples_per_cycle=500):
    """``2 x n_points`` normalized (voltage, current) path over the final full cycle."""
    x = np.asarray(x, dtype=np.float64)
    vs = _voltage(v)
    peak = np.max(np.abs(x), axis=-1)
    _require(peak == 0, "vi_trajectory", "zero current")
    v_peak = np.max(np.abs(vs))
    _require(v_peak == 0, "vi_trajectory", "zero voltage")
    n = x.shape[-1]
    if n < samples_per_cycle:
        raise DimensionError(f"row shorter than one cycle ({n} < {samples_per_cycle})")
    idx = n - samples_per_cycle + (np.arange(n_points) * samples_per_cycle) // n_points
    v_path = np.broadcast_to(vs[idx] / v_peak, x.shape[:-1] + (n_points,))
    i_path = x[..., idx] / peak[..., None]
    return np.stack([v_path, i_path], axis=-2)


def phase_shift(x, v):
    """``(theta, W, S)``: angle arccos(W/S) clamped to [0, pi/2], active and apparent power.

    The angle is evaluated as atan2 of the components of ``x`` orthogonal and
    parallel to ``v``; arccos loses half the digits near W/S = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    vs = _voltage(v)
    if vs.shape[-1] != x.shape[-1]:
        raise DimensionError(f"voltage length {vs.shape[-1]} != current length {x.shape[-1]}")
    w = np.mean(x * vs, axis=-1)
    v_ms = np.mean(vs * vs)
    s = _rms(x) * np.sqrt(v_ms)
    _require(s == 0, "phase_shift", "zero RMS")
    a = w / v_ms
    residual = x - a[..., None] * vs if np.ndim(a) else x - a * vs
    theta = np.arctan2(_rms(residual), a * np.sqrt(v_ms))
    return np.minimum(theta, np.pi / 2), w, s


def feature_vector(x, v, layout=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("feature_vector takes a single row; use feature_matrix for many")
    layout = layout or FeatureLayout(n_samples=x.size)
    if x.size != layout.n_samples:
        raise DimensionError(f"row length {x.size} does not match layout n_samples={layout.n_samples}")
    spc = layout.samples_per_cycle
    theta, _, _ = phase_shift(x, v)
    return FeatureVector(
        form_factor=float(form_factor(x)),
        temporal_centroid=float(temporal_centroid(x, spc, layout.centroid_quantity)),
        admittance_over_time=admittance_over_time(x, v, spc),
        wavelet_energy=wavelet_energy(x, layout.wavelet_levels),
        vi_trajectory=vi_trajectory(x, v, layout.vi_points, spc),
        phase_shift=float(theta),
        layout=layout,
    )


def feature_matrix(x, v, layout=None, chunk=256):
    """Flattened features of every row of ``x`` (A x T) in ``layout.names()`` order."""
    x = np.asarray(getattr(x, "data", x), dtype=np.float64)
    layout = layout or FeatureLayout(n_samples=x.shape[1])
    if x.shape[1] != layout.n_samples:
        raise DimensionError(f"row length {x.shape[1]} does not match layout n_samples={layout.n_samples}")
    spc = layout.samples_per_cycle
    out = np.empty((x.shape[0], layout.size))
    for s in range(0, x.shape[0], chunk):
        rows = x[s:s + chunk]
        theta, _, _ = phase_shift(rows, v)
        vi = vi_trajectory(rows, v, layout.vi_points, spc)
        out[s:s + chunk] = np.concatenate([
            form_factor(rows)[:, None],
            temporal_centroid(rows, spc, layout.centroid_quantity)[:, None],
            admittance_over_time(rows, v, spc),
            wavelet_energy(rows, layout.wavelet_levels),
            vi.reshape(rows.shape[0], -1),
            theta[:, None],
        ], axis=1)
    return out
