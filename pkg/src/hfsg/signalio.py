"""Waveform containers, mains-cycle alignment, windowing and the SIGMAT format."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ConfigError, FormatError, ValidationError

DEFAULT_SAMPLE_RATE = 30000.0
DEFAULT_MAINS_HZ = 60.0
DEFAULT_SAMPLES_PER_CYCLE = 500
DEFAULT_WINDOW = 30000

SIGMAT_MAGIC = b"SIGMAT"
SIGMAT_VERSION = 1
# magic, version, flags, rows, cols, sample rate, samples per cycle
HEADER = struct.Struct("<6sBBQQdQ")


def _frozen(a, dtype=np.float64):
    # read-only view; avoids copying multi-GB aggregate matrices
    a = np.asarray(a, dtype=dtype).view()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.ndim != 1 or s.size == 0:
            raise ValidationError("waveform must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(s)):
            raise ValidationError("waveform contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class SignatureMatrix:
    """N x T matrix of one-second current signatures, one per row."""

    data: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE

    def __post_init__(self):
        d = _frozen(self.data)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValidationError(f"signature matrix must be 2-D and nonempty, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValidationError("signature matrix contains non-finite entries")
        if not self.sample_rate_hz > 0:
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        spc = int(self.samples_per_cycle)
        if spc < 1 or spc != self.samples_per_cycle:
            raise ValidationError(f"samples_per_cycle must be a positive integer, got {self.samples_per_cycle}")
        if d.shape[1] % spc:
            raise ValidationError(
                f"row length {d.shape[1]} is not a multiple of samples_per_cycle={spc}")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "samples_per_cycle", spc)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_rows(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def with_data(self, data):
        return SignatureMatrix(data, self.sample_rate_hz, self.samples_per_cycle)


@dataclass(frozen=True)
class VoltageReference:
    waveform: Waveform
    mains_frequency_hz: float
    amplitude_v: float

    @property
    def samples(self):
        return self.waveform.samples

    @property
    def samples_per_cycle(self):
        return int(round(self.waveform.sample_rate_hz / self.mains_frequency_hz))

    def __len__(self):
        return len(self.waveform)


def samples_per_cycle_for(mains_frequency_hz, sample_rate_hz):
    ratio = sample_rate_hz / mains_frequency_hz
    spc = int(round(ratio))
    if spc < 1 or abs(ratio - spc) > 1e-9 * ratio:
        raise ConfigError(
            f"sample_rate_hz/mains_frequency_hz = {ratio!r} is not an integer number of samples per cycle")
    return spc


def generate_voltage_reference(mains_frequency_hz=DEFAULT_MAINS_HZ, sample_rate_hz=DEFAULT_SAMPLE_RATE,
                               n_samples=DEFAULT_WINDOW, amplitude_v=1.0):
    """Pure sine ``amplitude_v * sin(2 pi f0 t / fs)`` starting at phase zero."""
    for name, value in (("mains_frequency_hz", mains_frequency_hz), ("sample_rate_hz", sample_rate_hz),
                        ("n_samples", n_samples), ("amplitude_v", amplitude_v)):
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value}")
    spc = samples_per_cycle_for(mains_frequency_hz, sample_rate_hz)
    # phase from the position inside the cycle keeps sin(0)=0 exact at every cycle start
    t = np.arange(int(n_samples))
    v = amplitude_v * np.sin(2.0 * np.pi * (t % spc) / spc)
    return VoltageReference(Waveform(v, float(sample_rate_hz)), float(mains_frequency_hz), float(amplitude_v))


def rising_zero_crossings(v):
    """Fractional sample positions where ``v`` crosses zero going upward."""
    v = np.asarray(v, dtype=np.float64)
    i = np.flatnonzero((v[:-1] <= 0.0) & (v[1:] > 0.0))
    return i + (-v[i]) / (v[i + 1] - v[i])


def align_cycles(current, voltage, samples_per_cycle=DEFAULT_SAMPLES_PER_CYCLE):
    """Resample ``current`` to a fixed number of samples per voltage cycle.

    Cycles are delimited by rising zero crossings of ``voltage`` (located by
    linear interpolation) and each is linearly resampled to
    ``samples_per_cycle`` points, so the result is locked to the voltage phase
    and independent of the actual mains frequency. Partial cycles at either
    edge are dropped.
    """
    if len(current) != len(voltage):
        raise AlignmentError(f"current and voltage lengths differ ({len(current)} vs {len(voltage)})")
    if current.sample_rate_hz != voltage.sample_rate_hz:
        raise AlignmentError("current and voltage sample rates differ")
    if samples_per_cycle < 1:
        raise ConfigError(f"samples_per_cycle must be >= 1, got {samples_per_cycle}")
    zc = rising_zero_crossings(voltage.samples)
    if zc.size < 2:
        raise AlignmentError("voltage has fewer than one full cycle between rising zero crossings")
    frac = np.arange(samples_per_cycle) / samples_per_cycle
    starts, ends = zc[:-1], zc[1:]
    positions = (starts[:, None] + (ends - starts)[:, None] * frac).ravel()
    x = current.samples
    out = np.interp(positions, np.arange(x.size), x)
    return Waveform(out, current.sample_rate_hz)


def window_signatures(aligned, window_len=DEFAULT_WINDOW, samples_per_cycle=DEFAULT_SAMPLES_PER_CYCLE):
    """Cut ``aligned`` into consecutive non-overlapping windows; the remainder is dropped."""
    if window_len < 1 or window_len % samples_per_cycle:
        raise ConfigError(f"window_len={window_len} must be a positive multiple of samples_per_cycle={samples_per_cycle}")
    n = len(aligned) // window_len
    if n == 0:
        raise ValidationError(f"signal of {len(aligned)} samples is shorter than one window of {window_len}")
    data = aligned.samples[: n * window_len].reshape(n, window_len)
    return SignatureMatrix(data, aligned.sample_rate_hz, samples_per_cycle)


def segment_events(waveform, rms_window_cycles=1, threshold_ratio=0.15,
                   samples_per_cycle=DEFAULT_SAMPLES_PER_CYCLE):
    """Split a recording into steady ranges using block RMS.

    A range grows while each new block RMS stays within ``threshold_ratio`` of
    the running mean RMS of the range. Returns half-open ``(start, stop)``
    sample ranges covering the block-aligned prefix of the input.
    """
    if rms_window_cycles < 1:
        raise ConfigError(f"rms_window_cycles must be >= 1, got {rms_window_cycles}")
    if not threshold_ratio > 0:
        raise ConfigError(f"threshold_ratio must be positive, got {threshold_ratio}")
    block = samples_per_cycle * rms_window_cycles
    n_blocks = len(waveform) // block
    if n_blocks == 0:
        return [(0, len(waveform))]
    x = waveform.samples[: n_blocks * block].reshape(n_blocks, block)
    rms = np.sqrt(np.mean(x * x, axis=1))

    ranges = []
    start, total, count = 0, rms[0], 1
    for b in range(1, n_blocks):
        mean = total / count
        if abs(rms[b] - mean) > threshold_ratio * mean:
            ranges.append((start * block, b * block))
            start, total, count = b, rms[b], 1
        else:
            total += rms[b]
            count += 1
    ranges.append((start * block, n_blocks * block))
    return ranges


# --- SIGMAT binary format -------------------------------------------------------

def _encode_header(magic, rows, cols, sample_rate_hz, samples_per_cycle):
    return HEADER.pack(magic, SIGMAT_VERSION, 0, rows, cols, float(sample_rate_hz), int(samples_per_cycle))


def _decode_header(buf, magic):
    if len(buf) < HEADER.size:
        raise FormatError(f"file too short for a {HEADER.size}-byte header ({len(buf)} bytes)", offset=len(buf))
    got, version, flags, rows, cols, rate, spc = HEADER.unpack_from(buf, 0)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}", offset=0)
    if version != SIGMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=6)
    if flags != 0:
        raise FormatError(f"unsupported flags {flags:#x}", offset=7)
    if not (math.isfinite(rate) and rate > 0):
        raise FormatError(f"invalid sample rate {rate}", offset=24)
    if spc < 1:
        raise FormatError(f"invalid samples_per_cycle {spc}", offset=32)
    return rows, cols, rate, spc


def write_signature_matrix(matrix, path):
    """Write ``matrix`` as SIGMAT (binary32 payload)."""
    data = np.asarray(matrix.data)
    with np.errstate(over="ignore"):
        payload = data.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValidationError("matrix values overflow IEEE-754 binary32")
    rows, cols = data.shape
    header = _encode_header(SIGMAT_MAGIC, rows, cols, matrix.sample_rate_hz, matrix.samples_per_cycle)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(payload).tobytes())


def read_signature_matrix(path):
    buf = Path(path).read_bytes()
    rows, cols, rate, spc = _decode_header(buf, SIGMAT_MAGIC)
    if rows < 1 or cols < 1:
        raise FormatError(f"empty matrix declared ({rows} x {cols})", offset=8)
    n = rows * cols
    if n * 4 > 2**62:
        raise FormatError(f"declared dimensions {rows} x {cols} overflow", offset=8)
    expected = HEADER.size + 4 * n
    if len(buf) < expected:
        raise FormatError(
            f"truncated payload: header declares {rows} x {cols} but only "
            f"{(len(buf) - HEADER.size) // 4} values present", offset=len(buf))
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after payload", offset=expected)
    if cols % spc:
        raise FormatError(f"column count {cols} not a multiple of samples_per_cycle {spc}", offset=16)
    data = np.frombuffer(buf, dtype="<f4", count=n, offset=HEADER.size).astype(np.float64)
    try:
        return SignatureMatrix(data.reshape(rows, cols), rate, spc)
    except ValidationError as exc:
        raise FormatError(str(exc), offset=HEADER.size) from exc


def write_csv_matrix(data, path, fmt="%.17g"):
    np.savetxt(path, np.atleast_2d(np.asarray(data)), delimiter=",", fmt=fmt)


def read_csv_matrix(path, sample_rate_hz=DEFAULT_SAMPLE_RATE, samples_per_cycle=None):
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2))
    if samples_per_cycle is None:
        samples_per_cycle = samples_per_cycle_for(DEFAULT_MAINS_HZ, sample_rate_hz)
    return SignatureMatrix(data, sample_rate_hz, samples_per_cycle)


def read_matrix(path, **kwargs):
    """Read a SIGMAT or CSV file, chosen by extension."""
    if os.fspath(path).lower().endswith(".csv"):
        return read_csv_matrix(path, **kwargs)
    return read_signature_matrix(path)
