"""PSNR and SSIM for single-channel images."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

__all__ = ["psnr", "ssim", "MetricReport", "PSNR_CAP", "SSIM_WINDOW"]

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _pair(reference, test):
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(reference, test, peak=1.0):
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP`` for identical inputs."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    a, b = _pair(reference, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(peak * peak / mse), PSNR_CAP)


def _window():
    k = np.arange(SSIM_WINDOW, dtype=np.float64) - SSIM_WINDOW // 2
    g = np.exp(-0.5 * (k / SSIM_SIGMA) ** 2)
    return g / g.sum()


def _local_mean(img, g):
    # separable filter, then keep only windows fully inside the image
    r = SSIM_WINDOW // 2
    out = correlate1d(img, g, axis=0, mode="constant")
    out = correlate1d(out, g, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(reference, test, peak=1.0):
    """Mean structural similarity over all valid 11x11 Gaussian windows (sigma 1.5).

    Uses ``C1 = (0.01 peak)^2`` and ``C2 = (0.03 peak)^2`` and population
    (not sample) local covariances.
    """
    a, b = _pair(reference, test)
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"ssim needs a 2D image at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    g = _window()
    mu_a = _local_mean(a, g)
    mu_b = _local_mean(b, g)
    var_a = _local_mean(a * a, g) - mu_a ** 2
    var_b = _local_mean(b * b, g) - mu_b ** 2
    cov = _local_mean(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    per_image: list = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs):
        """Average over ``(image_id, reference, test)`` triples."""
        rows = [(name, psnr(ref, est), ssim(ref, est)) for name, ref, est in pairs]
        if not rows:
            raise ValueError("no image pairs given")
        return cls(float(np.mean([r[1] for r in rows])),
                   float(np.mean([r[2] for r in rows])), rows)
