"""Experiment configuration: a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored; list values are comma
separated. Example::

    phantom = smooth-bumps
    size = 64
    n_images = 4
    cr = 0.01, 0.05, 0.10, 0.20
    methods = pinv, ddim-fused
    seeds = 0
    output = results
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..estimators import PRIOR_KINDS
from ..sensing import SENSOR_KINDS
from .phantoms import MIN_PHANTOM_SIZE, PHANTOM_KINDS

__all__ = ["ExperimentConfig", "METHODS", "parse_config_text", "load_config", "ConfigError"]

LIST_KEYS = ("images", "cr", "methods", "method", "seeds")
METHODS = ("pinv", "ddim-gap", "ddim-hqs", "ddim-fused", "pnp-hqs", "pnp-gap")


class ConfigError(ValueError):
    pass


def _floats(v):
    return tuple(float(x) for x in v)


def _ints(v):
    return tuple(int(x) for x in v)


def _strs(v):
    return tuple(str(x) for x in v)


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _opt_float(v):
    return None if str(v).strip().lower() in ("", "none", "ramp") else float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    # image source: phantoms unless ``images`` lists PGM files
    phantom: str = "smooth-bumps"
    size: int = 64
    n_images: int = 4
    image_seed: int = 0
    images: tuple = ()
    # sweep
    cr: tuple = (0.01, 0.05, 0.10, 0.20)
    methods: tuple = ("pinv", "ddim-gap", "ddim-hqs", "ddim-fused")
    seeds: tuple = (0,)
    # sensing
    sensor: str = "orthonormal-random"
    sensor_seed: int = 0
    # prior
    prior: str = "dct-gaussian"
    prior_phantom: str = ""
    prior_train: int = 64
    prior_seed: int = 1000
    smoothing_scale: float = 8.0
    # diffusion schedule and consistency
    T: int = 100
    beta_min: float = 1e-3
    beta_max: float = 0.2
    zeta: float = 0.0
    lam: float = 0.05
    delta: float | None = None
    # pnp baselines
    pnp_iterations: int = 50
    pnp_gamma: float = 0.1
    pnp_sigma_max: float = 0.2
    pnp_sigma_min: float = 0.01
    # execution / output
    output: str = "results"
    n_jobs: int = 1
    save_images: bool = True
    trace: bool = False

    _converters = {
        "images": _strs, "cr": _floats, "methods": _strs, "seeds": _ints,
        "delta": _opt_float, "save_images": _bool, "trace": _bool,
    }

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            key = "methods" if key == "method" else key
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            conv = cls._converters.get(key)
            try:
                if conv is not None:
                    value = conv(raw)
                else:
                    default = known[key].default
                    value = type(default)(raw[0] if isinstance(raw, (list, tuple)) else raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
            kwargs[key] = value
        return cls(**kwargs)

    def validate(self):
        if not self.cr:
            raise ConfigError("cr list is empty")
        for c in self.cr:
            if not 0.0 < c <= 1.0:
                raise ConfigError(f"compression ratio {c} outside (0, 1]")
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if not self.methods:
            raise ConfigError("methods list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.sensor not in SENSOR_KINDS:
            raise ConfigError(f"unknown sensor kind {self.sensor!r}")
        if self.prior not in PRIOR_KINDS:
            raise ConfigError(f"unknown prior {self.prior!r}; expected one of {PRIOR_KINDS}")
        if not self.images:
            if self.phantom not in PHANTOM_KINDS:
                raise ConfigError(f"unknown phantom {self.phantom!r}")
            if self.size < MIN_PHANTOM_SIZE:
                raise ConfigError(f"size must be at least {MIN_PHANTOM_SIZE}")
            if self.n_images < 1:
                raise ConfigError("n_images must be positive")
        if self.prior_phantom and self.prior_phantom not in PHANTOM_KINDS:
            raise ConfigError(f"unknown prior_phantom {self.prior_phantom!r}")
        uses_learned_prior = self.prior != "smoothing" and any(
            m.startswith("ddim") for m in self.methods)
        if uses_learned_prior and self.prior_train < 2:
            raise ConfigError(f"prior {self.prior!r} needs prior_train >= 2 training phantoms")
        if self.T < 1 or not 0 < self.beta_min <= self.beta_max < 1:
            raise ConfigError("invalid diffusion schedule parameters")
        if not 0.0 <= self.zeta <= 1.0:
            raise ConfigError("zeta must lie in [0, 1]")
        if self.lam <= 0:
            raise ConfigError("lam must be positive")
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise ConfigError("delta must lie in [0, 1]")
        if self.pnp_iterations < 1 or self.pnp_gamma <= 0:
            raise ConfigError("invalid pnp parameters")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be positive")

    def canonical(self):
        """Plain-JSON view of the settings that affect results."""
        d = dataclasses.asdict(self)
        for key in ("output", "n_jobs"):
            d.pop(key)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(d.items())}

    def config_hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def parse_config_text(text):
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        items = [v.strip() for v in value.split(",")]
        mapping[key] = items if key in LIST_KEYS else value
    return ExperimentConfig.from_mapping(mapping)


def load_config(path):
    return parse_config_text(Path(path).read_text())
