"""Time-domain decoding, aggregate scenarios, power shares and train/test splits."""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DimensionError, HfsgError, HfsgWarning, PipelineError,
                     UndefinedCorrelationError)
from .genmodel import make_submetered
from .latent import fit_pca, load_model, reconstruct
from .rng import stream
from .signalio import SignatureMatrix, generate_voltage_reference


@dataclass(frozen=True)
class ActivationMatrix:
    a: np.ndarray
    k_min: int
    k_max: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.uint8).view()
        a.setflags(write=False)
        if a.ndim != 2:
            raise DimensionError(f"activation must be 2-D, got shape {a.shape}")
        object.__setattr__(self, "a", a)

    @property
    def shape(self):
        return self.a.shape

    def row_sums(self):
        return self.a.sum(axis=1, dtype=np.int64)

    def rows(self, idx):
        return ActivationMatrix(self.a[idx], self.k_min, self.k_max)


@dataclass(frozen=True)
class LabeledDataset:
    x_a: SignatureMatrix
    y_class_ind: np.ndarray
    y_brand_ind: np.ndarray
    p_a: np.ndarray
    activation: ActivationMatrix
    brands_per_class: int = 1
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.p_a.shape[0]

    @property
    def n_classes(self):
        return self.p_a.shape[1]


@dataclass(frozen=True)
class SplitPair:
    train: LabeledDataset
    test: LabeledDataset
    mode: str
    tau: float
    train_brands: tuple = ()
    test_brands: tuple = ()


# --- phase correction -----------------------------------------------------------

def _pearson_rows(x, v):
    xc = x - x.mean(axis=-1, keepdims=True)
    vc = v - v.mean()
    num = xc @ vc
    den = np.sqrt(np.sum(xc * xc, axis=-1)) * np.sqrt(vc @ vc)
    return num, den


def pearson(x, v):
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.shape != v.shape or x.ndim != 1 or x.size < 2:
        raise DimensionError(f"pearson needs two equal-length 1-D signals (got {x.shape}, {v.shape})")
    num, den = _pearson_rows(x, v)
    if den == 0:
        if np.ptp(x) == 0 and np.ptp(v) == 0:
            raise UndefinedCorrelationError("both signals are constant")
        return 0.0
    return float(np.clip(num / den, -1.0, 1.0))


def cond_mirror(x_g, v):
    """Negate every row whose Pearson correlation with the voltage is negative."""
    data = np.asarray(x_g.data)
    vs = np.asarray(getattr(v, "samples", v), dtype=np.float64)
    if data.shape[1] != vs.size:
        raise DimensionError(f"row length {data.shape[1]} != voltage length {vs.size}")
    num, den = _pearson_rows(data, vs)
    constant = den == 0
    if np.any(constant):
        warnings.warn(f"{int(constant.sum())} constant row(s) left unmirrored", HfsgWarning, stacklevel=2)
    flip = (num < 0) & ~constant
    out = np.where(flip[:, None], -data, data)
    return x_g.with_data(out)


# --- aggregation ----------------------------------------------------------------

def build_activation_matrix(a_rows, n, k_min, k_max, rng):
    """Each row activates K ~ U{k_min..k_max} distinct appliances."""
    if not 1 <= k_min <= k_max:
        raise ConfigError(f"need 1 <= k_min <= k_max, got k_min={k_min}, k_max={k_max}")
    if k_max > n:
        raise ConfigError(f"k_max={k_max} exceeds the number of appliances n={n}")
    a = np.zeros((a_rows, n), dtype=np.uint8)
    ks = rng.integers(k_min, k_max + 1, size=a_rows)
    for i, k in enumerate(ks):
        a[i, rng.choice(n, size=int(k), replace=False)] = 1
    return ActivationMatrix(a, int(k_min), int(k_max))


def aggregate_signatures(activation, x_g, rows=None):
    """Kirchhoff sum of the active submetered rows, accumulated left to right.

    ``rows`` restricts the output to a subset of scenarios.
    """
    a = activation.a
    xg = np.asarray(getattr(x_g, "data", x_g))
    if a.shape[1] != xg.shape[0]:
        raise DimensionError(f"activation has {a.shape[1]} columns but x_g has {xg.shape[0]} rows")
    rows = np.arange(a.shape[0]) if rows is None else np.asarray(rows)
    out = np.zeros((rows.size, xg.shape[1]))
    for r, i in enumerate(rows):
        for j in np.flatnonzero(a[i]):
            out[r] += xg[j]
    return out


def appliance_power(x_g, v):
    """Active power of each submetered row, mean_t(x_t v_t)."""
    xg = np.asarray(getattr(x_g, "data", x_g))
    vs = np.asarray(getattr(v, "samples", v), dtype=np.float64)
    if xg.shape[1] != vs.size:
        raise DimensionError(f"row length {xg.shape[1]} != voltage length {vs.size}")
    return xg @ vs / vs.size


def compute_power_shares(activation, x_g, v, y_class, normalize=True, n_classes=None):
    """Per-scenario, per-class active power; row-normalized to shares by default."""
    y_class = np.asarray(y_class, dtype=np.int64)
    if y_class.shape != (activation.shape[1],):
        raise DimensionError(f"y_class has length {y_class.size}, expected {activation.shape[1]}")
    d = int(y_class.max()) + 1 if n_classes is None else int(n_classes)
    power = appliance_power(x_g, v)
    by_class = np.zeros((y_class.size, d))
    by_class[np.arange(y_class.size), y_class] = power
    raw = activation.a.astype(np.float64) @ by_class
    negative = raw < 0
    if np.any(negative):
        warnings.warn(f"{int(negative.sum())} negative class power value(s) clamped to 0",
                      HfsgWarning, stacklevel=2)
        raw = np.where(negative, 0.0, raw)
    if not normalize:
        return raw
    total = raw.sum(axis=1, keepdims=True)
    return np.divide(raw, total, out=np.zeros_like(raw), where=total > 0)


def brand_indicator(activation, y_class, y_brand, n_classes, brands_per_class):
    """A x (D*B) indicator of the global brands ``class*B + brand`` active in each scenario."""
    gid = np.asarray(y_class) * brands_per_class + np.asarray(y_brand)
    onehot = np.zeros((gid.size, n_classes * brands_per_class), dtype=np.uint8)
    onehot[np.arange(gid.size), gid] = 1
    return (activation.a.astype(np.int64) @ onehot > 0).astype(np.uint8)


# --- splitting ------------------------------------------------------------------

def split_rows(y_brand_ind, brands_per_class, mode, tau, rng):
    """Row partition shared by ``split_dataset`` and the pipeline.

    Returns ``(train_rows, test_rows, train_brands, test_brands)``.
    """
    if not 0 < tau < 1:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    n_rows = y_brand_ind.shape[0]
    if mode == "uniform":
        perm = rng.permutation(n_rows)
        n_train = int(math.floor(tau * n_rows))
        return np.sort(perm[:n_train]), np.sort(perm[n_train:]), (), ()
    if mode != "brand":
        raise ConfigError(f"split mode must be 'uniform' or 'brand', got {mode!r}")
    b = int(brands_per_class)
    if b < 2:
        raise ConfigError(f"brand split needs at least 2 brands per class, got {b}")
    d = y_brand_ind.shape[1] // b
    # at least one brand per class on each side
    n_train_brands = min(max(math.ceil(tau * b), 1), b - 1)
    is_train = np.zeros(d * b, dtype=bool)
    for c in range(d):
        is_train[c * b + rng.choice(b, size=n_train_brands, replace=False)] = True
    has_test_brand = (y_brand_ind[:, ~is_train] > 0).any(axis=1)
    train_brands = tuple(int(i) for i in np.flatnonzero(is_train))
    test_brands = tuple(int(i) for i in np.flatnonzero(~is_train))
    return np.flatnonzero(~has_test_brand), np.flatnonzero(has_test_brand), train_brands, test_brands


def _subset(d, rows):
    return LabeledDataset(
        x_a=d.x_a.with_data(np.asarray(d.x_a.data)[rows]),
        y_class_ind=d.y_class_ind[rows], y_brand_ind=d.y_brand_ind[rows], p_a=d.p_a[rows],
        activation=d.activation.rows(rows), brands_per_class=d.brands_per_class,
        provenance=dict(d.provenance))


def split_dataset(d, mode, tau, rng):
    """Uniform row split or brand split (mixed-brand scenarios go to test)."""
    tr, te, btr, bte = split_rows(d.y_brand_ind, d.brands_per_class, mode, tau, rng)
    return SplitPair(_subset(d, tr), _subset(d, te), mode, float(tau), btr, bte)


# --- orchestration --------------------------------------------------------------

def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HfsgError as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(name, exc) from exc
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, exc) from exc


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def make_datasets(config, model=None, real=None, model_path=None):
    """Full pipeline from a fitted/persisted model (or real signatures) to a split dataset.

    ``config`` is a :class:`hfsg.config.RunConfig`. Exactly one of ``model``,
    ``model_path`` or ``real`` supplies the latent space.
    """
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HfsgWarning)
        if model_path is not None:
            model = _stage("load", load_model, model_path)
        elif model is None:
            if real is None:
                raise PipelineError("load", ConfigError("no model, model_path or real signatures supplied"))
            model = _stage("fit", fit_pca, real, config.n_components, config.variance_threshold)

        gen = _stage("config", config.generation)
        v = _stage("voltage", generate_voltage_reference, config.mains_frequency_hz, model.sample_rate_hz,
                   model.n_samples, config.voltage_amplitude)
        latent = _stage("submetered", make_submetered, gen, model)
        x_g = _stage("reconstruct", reconstruct, model, latent)
        x_g = _stage("mirror", cond_mirror, x_g, v)

        act = _stage("activation", build_activation_matrix, config.n_aggregate, len(latent),
                     config.k_min, config.k_max, stream(config.seed, "activation"))
        d, b = config.n_classes, config.brands_per_class
        p_a = _stage("power", compute_power_shares, act, x_g, v, latent.y_class,
                     config.normalize_shares, d)
        y_brand_ind = brand_indicator(act, latent.y_class, latent.y_brand, d, b)
        tr, te, btr, bte = _stage("split", split_rows, y_brand_ind, b, config.split_mode, config.tau,
                                  stream(config.seed, "split"))
        for w in caught:
            notes.append(str(w.message))

    provenance = {
        "seed": config.seed,
        "effective_n_samples": gen.effective_samples,
        "n_components": model.n_components,
        "notes": notes,
        "config": config.as_dict(),
    }
    if model_path is not None:
        provenance["model_sha256"] = file_digest(model_path)

    def build(rows):
        x_a = _stage("aggregate", aggregate_signatures, act, x_g, rows)
        return LabeledDataset(
            x_a=x_g.with_data(x_a), y_class_ind=(p_a[rows] > 0).astype(np.uint8),
            y_brand_ind=y_brand_ind[rows], p_a=p_a[rows], activation=act.rows(rows),
            brands_per_class=b, provenance=provenance)

    if len(tr) == 0 or len(te) == 0:
        raise PipelineError("split", ConfigError(
            f"split produced {len(tr)} train and {len(te)} test rows; adjust tau or n_aggregate"))
    return SplitPair(build(tr), build(te), config.split_mode, float(config.tau), btr, bte)
