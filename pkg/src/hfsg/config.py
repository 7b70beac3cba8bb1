"""Flat ``key=value`` run configuration shared by the pipeline and the CLI."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .genmodel import GenerationConfig

_HELP = {
    "seed": "single source of all randomness",
    "n_samples": "submetered signatures to generate (N); rounded down to a multiple of classes*modes",
    "n_classes": "appliance classes (D)",
    "modes_per_class": "operational modes (clusters) per class (M)",
    "brands_per_class": "k-means brands per mode (B)",
    "separability": "class separability eps_sep scaling the centroid spread",
    "sigma_min": "lower bound of the per-cluster spread U(sigma_min, sigma_max)",
    "sigma_max": "upper bound of the per-cluster spread",
    "latent_bound_min": "scalar lower centroid bound; 'model' uses the model's z_min",
    "latent_bound_max": "scalar upper centroid bound; 'model' uses the model's z_max",
    "n_aggregate": "aggregate scenarios to synthesize (A)",
    "k_min": "minimum simultaneously active appliances per scenario",
    "k_max": "maximum simultaneously active appliances per scenario",
    "split_mode": "'uniform' or 'brand'",
    "tau": "train share (uniform) or share of brands kept for training (brand)",
    "normalize_shares": "divide per-class active power by the scenario total",
    "mains_frequency_hz": "mains frequency of the voltage reference",
    "voltage_amplitude": "peak voltage of the reference (normalized volts)",
    "n_components": "latent dimension when fitting from real signatures",
    "variance_threshold": "cumulative explained variance selecting L instead of n_components ('none' to disable)",
    "knn_k": "neighbours of the KNN baseline",
    "tree_max_depth": "depth limit of the regression tree baseline",
    "tree_min_leaf": "minimum rows per tree leaf",
    "wavelet_levels": "Haar decomposition depth of the wavelet-energy feature",
    "vi_points": "points sampled along the VI trajectory",
    "metric_knn_k": "k of the k-th nearest real neighbour ball in beta-recall",
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    n_samples: int = 400
    n_classes: int = 4
    modes_per_class: int = 1
    brands_per_class: int = 2
    separability: float = 1.0
    sigma_min: float = 0.5
    sigma_max: float = 1.5
    latent_bound_min: typing.Optional[float] = None
    latent_bound_max: typing.Optional[float] = None
    n_aggregate: int = 1000
    k_min: int = 1
    k_max: int = 3
    split_mode: str = "uniform"
    tau: float = 0.8
    normalize_shares: bool = True
    mains_frequency_hz: float = 60.0
    voltage_amplitude: float = 1.0
    n_components: int = 50
    variance_threshold: typing.Optional[float] = None
    knn_k: int = 5
    tree_max_depth: int = 12
    tree_min_leaf: int = 5
    wavelet_levels: int = 8
    vi_points: int = 50
    metric_knn_k: int = 5

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive_ints = ("n_samples", "n_classes", "modes_per_class", "brands_per_class", "n_aggregate",
                         "k_min", "k_max", "n_components", "knn_k", "tree_min_leaf", "wavelet_levels",
                         "vi_points", "metric_knn_k")
        for key in positive_ints:
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}={getattr(self, key)}: must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed={self.seed}: must be >= 0")
        if self.tree_max_depth < 0:
            raise ConfigError(f"tree_max_depth={self.tree_max_depth}: must be >= 0")
        if self.separability < 0:
            raise ConfigError(f"separability={self.separability}: must be >= 0")
        if not 0 < self.sigma_min:
            raise ConfigError(f"sigma_min={self.sigma_min}: must be > 0")
        if self.sigma_max < self.sigma_min:
            raise ConfigError(f"sigma_max={self.sigma_max}: must be >= sigma_min={self.sigma_min}")
        if (self.latent_bound_min is None) != (self.latent_bound_max is None):
            raise ConfigError("latent_bound_min/latent_bound_max: set both or neither")
        if self.latent_bound_min is not None and self.latent_bound_max < self.latent_bound_min:
            raise ConfigError(f"latent_bound_max={self.latent_bound_max}: must be >= latent_bound_min")
        if self.k_max < self.k_min:
            raise ConfigError(f"k_max={self.k_max}: must be >= k_min={self.k_min}")
        if self.split_mode not in ("uniform", "brand"):
            raise ConfigError(f"split_mode={self.split_mode!r}: must be 'uniform' or 'brand'")
        if not 0 < self.tau < 1:
            raise ConfigError(f"tau={self.tau}: must lie in (0, 1)")
        if self.split_mode == "brand" and self.brands_per_class < 2:
            raise ConfigError(f"brands_per_class={self.brands_per_class}: brand split needs >= 2")
        if self.n_samples < self.n_classes * self.modes_per_class:
            raise ConfigError(f"n_samples={self.n_samples}: must be >= n_classes*modes_per_class")
        if self.mains_frequency_hz <= 0 or self.voltage_amplitude <= 0:
            raise ConfigError("mains_frequency_hz/voltage_amplitude: must be > 0")
        if self.variance_threshold is not None and not 0 < self.variance_threshold <= 1:
            raise ConfigError(f"variance_threshold={self.variance_threshold}: must lie in (0, 1]")

    def generation(self):
        bounds = None
        if self.latent_bound_min is not None:
            bounds = (self.latent_bound_min, self.latent_bound_max)
        return GenerationConfig(
            n_samples=self.n_samples, n_classes=self.n_classes, modes_per_class=self.modes_per_class,
            brands_per_class=self.brands_per_class, separability=self.separability,
            sigma_bounds=(self.sigma_min, self.sigma_max), latent_bounds=bounds, seed=self.seed)

    def as_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.as_dict().items())


def format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_TYPES = typing.get_type_hints(RunConfig)


def _coerce(key, text):
    kind = _TYPES[key]
    text = text.strip()
    optional = typing.get_origin(kind) is typing.Union
    if optional:
        if text.lower() in ("", "none", "model"):
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}={text!r}: expected {kind.__name__}") from None


def parse_lines(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_config(path=None, overrides=None, base=None):
    """Read a flat config file, apply ``overrides`` (flags win) and validate everything.

    ``base`` holds defaults that sit below the file, e.g. an experiment preset.
    """
    raw = {key: format_value(value) for key, value in (base or {}).items()}
    if path is not None:
        raw.update(parse_lines(Path(path).read_text(), str(path)))
    for key, value in (overrides or {}).items():
        raw[key] = value if isinstance(value, str) else format_value(value)
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    return RunConfig(**{key: _coerce(key, value) for key, value in raw.items()})


def describe_keys():
    """``(key, default, help)`` for every config key, for ``--help`` output."""
    return [(f.name, format_value(f.default), _HELP[f.name]) for f in fields(RunConfig)]
