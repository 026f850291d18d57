"""Discrete diffusion noise schedule and the forward noising process."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DiffusionSchedule", "build_schedule", "forward_noise"]


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Per-step coefficients of the reverse sampler.

    ``alpha_bar`` has ``T + 1`` entries with ``alpha_bar[0] == 1``; it is the
    cumulative product of ``1 - beta`` and plays the role of ``alpha_t`` in
    the forward process ``x_t = sqrt(alpha_t) x_0 + sqrt(1 - alpha_t) z``.
    ``sigma``, ``w`` and ``delta`` have ``T`` entries, entry ``t - 1`` holding
    the value for step ``t``.
    """

    alpha_bar: np.ndarray
    sigma: np.ndarray
    w: np.ndarray
    delta: np.ndarray
    zeta: float = 0.0

    def __post_init__(self):
        ab = _frozen(self.alpha_bar)
        T = ab.shape[0] - 1
        if ab.ndim != 1 or T < 1:
            raise ValueError("alpha_bar needs at least two entries")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must equal 1")
        if np.any(ab[1:] <= 0) or np.any(ab > 1):
            raise ValueError("alpha_bar must lie in (0, 1]")
        if np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "alpha_bar", ab)
        for name in ("sigma", "w", "delta"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (T,):
                raise ValueError(f"{name} must have {T} entries, got shape {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")
        if np.any((self.delta < 0) | (self.delta > 1)):
            raise ValueError("delta must lie in [0, 1]")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if np.any(1.0 - ab[:-1] - self.sigma ** 2 < -1e-12):
            raise ValueError("sigma_t^2 exceeds 1 - alpha_bar[t-1]")

    @property
    def T(self):
        return self.alpha_bar.shape[0] - 1

    @property
    def deterministic(self):
        return self.zeta == 0.0 and not np.any(self.sigma)

    def with_delta(self, delta):
        return DiffusionSchedule(self.alpha_bar, self.sigma, self.w, delta, self.zeta)


def build_schedule(T=100, beta_min=1e-3, beta_max=0.2, zeta=0.0, stochastic=False,
                   delta=None, w=None):
    """Linear-beta schedule.

    ``alpha_bar[t] = prod_{s <= t} (1 - beta_s)`` with ``beta`` linearly
    spaced on ``[beta_min, beta_max]``. The defaults give
    ``alpha_bar[100] ~ 4e-5``.

    In deterministic mode (``stochastic=False``) ``sigma`` is zero, ``zeta``
    is forced to 0 and ``w`` to 1. In stochastic mode
    ``sigma_t = sqrt(zeta * (1 - alpha_bar[t-1]))``, which makes the
    ``zeta``-parameterized update coincide with the ``sigma``-parameterized
    one when ``w = 1``.

    ``delta`` defaults to a linear ramp from 1 at ``t = 1`` to 0 at ``t = T``:
    hard projection early, soft least squares late.
    """
    T = int(T)
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    betas = np.linspace(beta_min, beta_max, T)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    if stochastic:
        if not 0.0 <= zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {zeta}")
        sigma = np.sqrt(zeta * (1.0 - alpha_bar[:-1]))
        w = np.ones(T) if w is None else np.broadcast_to(np.asarray(w, dtype=float), (T,))
    else:
        zeta = 0.0
        sigma = np.zeros(T)
        w = np.ones(T)
    if delta is None:
        delta = np.linspace(1.0, 0.0, T)
    else:
        delta = np.broadcast_to(np.asarray(delta, dtype=float), (T,))
    return DiffusionSchedule(alpha_bar, sigma, w, delta, float(zeta))


def forward_noise(x0, t, schedule, rng_seed=0):
    """Sample ``sqrt(a_t) x0 + sqrt(1 - a_t) z`` with a seeded standard normal ``z``."""
    if not 0 <= t <= schedule.T:
        raise ValueError(f"t must lie in [0, {schedule.T}], got {t}")
    x0 = np.asarray(x0, dtype=np.float64)
    a = schedule.alpha_bar[t]
    z = np.random.default_rng(rng_seed).standard_normal(x0.shape)
    if t == 0:
        return x0.copy()
    return math.sqrt(a) * x0 + math.sqrt(1.0 - a) * z
