"""Iterative plug-and-play baselines (PnP-HQS and PnP-GAP)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .consistency import gap_update, hqs_update
from .priors import DenoiserAdapter, smoothing_denoiser
from .sensing import pseudoinverse_apply

__all__ = ["PnpConfig", "pnp_solve", "geometric_sigmas", "PNP_VARIANTS"]

PNP_VARIANTS = ("hqs", "gap")


def geometric_sigmas(iterations, sigma_max=0.2, sigma_min=0.01):
    if iterations == 1:
        return np.array([sigma_max], dtype=np.float64)
    return np.geomspace(sigma_max, sigma_min, iterations)


@dataclass(frozen=True, eq=False)
class PnpConfig:
    """``iterations`` alternations; ``gamma`` is the HQS penalty; ``sigmas`` the denoiser levels.

    ``sigmas`` defaults to a geometric decay from 0.2 to 0.01.
    """

    iterations: int = 50
    gamma: float = 0.1
    sigmas: np.ndarray | None = None
    variant: str = "hqs"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.variant not in PNP_VARIANTS:
            raise ValueError(f"variant must be one of {PNP_VARIANTS}, got {self.variant!r}")
        sig = (geometric_sigmas(self.iterations) if self.sigmas is None
               else np.asarray(self.sigmas, dtype=np.float64))
        if sig.shape != (self.iterations,):
            raise ValueError(f"need {self.iterations} noise levels, got shape {sig.shape}")
        if np.any(sig < 0) or np.any(np.diff(sig) > 0):
            raise ValueError("sigmas must be non-negative and non-increasing")
        sig = sig.copy()
        sig.setflags(write=False)
        object.__setattr__(self, "sigmas", sig)


def pnp_solve(y, sensor, denoiser=None, cfg=None, x_init=None, callback=None):
    """Alternate a consistency step with a denoiser for a fixed number of iterations.

    The consistency step is either the exact projection
    ``x + H^T (H H^T)^{-1} (y - H x)`` (``gap``) or
    ``(I + H^T H / gamma)^{-1} (v + H^T y / gamma)`` (``hqs``), which is the
    regularized least-squares update with weight ``gamma``. The iterate
    returned is the output of the last denoising step.

    ``denoiser`` is a :class:`~pnpdiff.priors.DenoiserAdapter` (or anything
    with ``denoise(noisy, sigma)``); it defaults to the smoothing denoiser.
    ``callback(k, x_consistent, z_denoised)`` is called after each iteration.
    """
    cfg = PnpConfig() if cfg is None else cfg
    if denoiser is None:
        denoiser = DenoiserAdapter(partial(smoothing_denoiser))
    z = pseudoinverse_apply(sensor, y) if x_init is None else np.asarray(x_init, dtype=np.float64)
    for k in range(cfg.iterations):
        if cfg.variant == "gap":
            x = gap_update(sensor, z, y)
        else:
            x = hqs_update(sensor, z, y, cfg.gamma)
        z = denoiser.denoise(x, float(cfg.sigmas[k]))
        if callback is not None:
            callback(k, x, z)
    return z
