"""Score priors for the diffusion sampler.

A prior is any object with a ``score(x_t, t, schedule)`` method returning an
estimate of the gradient of ``log p_t`` at ``x_t``. Provided here:

* :class:`GaussianPrior`, a diagonal Gaussian whose score is known exactly;
* :class:`DCTPrior`, which evaluates any prior on orthonormal 2D DCT
  coefficients (a diagonal Gaussian there is a stationary, smooth image
  prior);
* :class:`DenoiserAdapter`, which turns a Gaussian denoiser ``D(noisy, sigma)``
  into a score through Tweedie's identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import correlate1d

__all__ = [
    "ScorePrior",
    "GaussianPrior",
    "DCTPrior",
    "fit_dct_gaussian_prior",
    "DenoiserAdapter",
    "gaussian_score",
    "tweedie_denoise",
    "score_from_denoiser",
    "smoothing_denoiser",
    "smoothing_width",
]


class ScorePrior(Protocol):
    def score(self, x_t: np.ndarray, t: int, schedule) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """Independent Gaussian prior ``x_0 ~ N(mean, diag(variance))``.

    ``mean`` and ``variance`` broadcast against the signal, so a scalar
    variance is allowed.
    """

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        var = np.array(self.variance, dtype=np.float64)
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            raise ValueError("prior variances must be positive and finite")
        if not np.all(np.isfinite(mean)):
            raise ValueError("prior mean must be finite")
        np.broadcast_shapes(mean.shape, var.shape)
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @classmethod
    def from_samples(cls, X, min_variance=1e-4):
        """Fit per-pixel mean and variance to a stack of training signals."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError("need at least two samples to estimate a variance")
        return cls(X.mean(axis=0), np.maximum(X.var(axis=0), min_variance))

    def score(self, x_t, t, schedule):
        return gaussian_score(self, x_t, t, schedule)

    def log_density(self, x_t, t, schedule):
        """Log of the noised marginal ``N(sqrt(a) mean, a var + 1 - a)``."""
        a = schedule.alpha_bar[t]
        v = a * self.variance + (1.0 - a)
        d = np.asarray(x_t, dtype=np.float64) - math.sqrt(a) * self.mean
        v = np.broadcast_to(v, d.shape)
        return float(-0.5 * np.sum(d * d / v + np.log(2.0 * np.pi * v)))


@dataclass(frozen=True, eq=False)
class DCTPrior:
    """Prior defined on the orthonormal 2D DCT-II coefficients of the signal.

    The transform is orthonormal, so isotropic forward noise stays isotropic
    and the pixel-domain score is the inverse transform of the coefficient
    score.
    """

    base: ScorePrior

    def score(self, x_t, t, schedule):
        c = dctn(np.asarray(x_t, dtype=np.float64), norm="ortho")
        return idctn(self.base.score(c, t, schedule), norm="ortho")


def fit_dct_gaussian_prior(images, min_variance=1e-8):
    """Diagonal Gaussian on DCT coefficients fitted to a stack of 2D images."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"expected a (n_images, rows, cols) stack, got shape {images.shape}")
    coeffs = dctn(images, axes=(1, 2), norm="ortho")
    return DCTPrior(GaussianPrior.from_samples(coeffs, min_variance=min_variance))


def gaussian_score(prior, x_t, t, schedule):
    """Exact score ``-(x_t - sqrt(a) mean) / (a var + 1 - a)``."""
    a = schedule.alpha_bar[t]
    x_t = np.asarray(x_t, dtype=np.float64)
    out = -(x_t - math.sqrt(a) * prior.mean) / (a * prior.variance + (1.0 - a))
    if out.shape != x_t.shape:
        raise ValueError(f"prior of shape {prior.mean.shape} does not match signal {x_t.shape}")
    return out


def tweedie_denoise(prior, x_t, t, schedule):
    """Clean estimate ``(x_t + (1 - a) score) / sqrt(a)``."""
    a = schedule.alpha_bar[t]
    if a <= 0:
        raise ValueError("alpha_bar must be positive for Tweedie denoising")
    x_t = np.asarray(x_t, dtype=np.float64)
    if a == 1.0:
        return x_t.copy()
    return (x_t + (1.0 - a) * prior.score(x_t, t, schedule)) / math.sqrt(a)


@dataclass(frozen=True, eq=False)
class DenoiserAdapter:
    """Wrap ``denoiser(noisy, sigma) -> clean`` as a score prior.

    If ``shape`` is given, flat inputs are reshaped to it before the denoiser
    runs and flattened afterwards, so image denoisers can serve dense sensors.
    """

    denoiser: Callable[[np.ndarray, float], np.ndarray]
    shape: tuple | None = field(default=None)

    def denoise(self, noisy, sigma):
        noisy = np.asarray(noisy, dtype=np.float64)
        if sigma == 0:
            return noisy.copy()
        if self.shape is not None and noisy.shape != tuple(self.shape):
            out = self.denoiser(noisy.reshape(self.shape), sigma)
            return np.asarray(out, dtype=np.float64).reshape(noisy.shape)
        return np.asarray(self.denoiser(noisy, sigma), dtype=np.float64)

    def score(self, x_t, t, schedule):
        return score_from_denoiser(self, x_t, t, schedule)


def score_from_denoiser(adapter, x_t, t, schedule):
    """Score implied by running the denoiser on the rescaled latent.

    The denoiser sees ``x_t / sqrt(a)`` at noise level
    ``sqrt((1 - a) / a)``; its output ``x0`` maps back to the score
    ``(sqrt(a) x0 - x_t) / (1 - a)``.
    """
    a = schedule.alpha_bar[t]
    if not 0.0 < a < 1.0:
        raise ValueError(f"alpha_bar[{t}] = {a} is outside (0, 1)")
    x_t = np.asarray(x_t, dtype=np.float64)
    sa = math.sqrt(a)
    x0 = adapter.denoise(x_t / sa, math.sqrt((1.0 - a) / a))
    return (sa * x0 - x_t) / (1.0 - a)


def smoothing_width(sigma, scale=8.0):
    return scale * sigma


def _gaussian_taps(width, max_radius):
    radius = min(math.ceil(3.0 * width), max_radius)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (k / width) ** 2)
    return taps / taps.sum()


def smoothing_denoiser(noisy, sigma, scale=8.0):
    """Separable Gaussian blur whose width grows with the noise level.

    The kernel standard deviation is ``scale * sigma`` pixels, truncated at
    ``ceil(3 * width)`` taps per side and never wider than the signal. The
    boundary is half-sample symmetric, which together with a symmetric,
    normalized kernel makes the operator symmetric and doubly stochastic:
    constants and the mean are preserved and energy never grows.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    out = np.array(noisy, dtype=np.float64)
    width = smoothing_width(sigma, scale)
    if width < 1e-3:
        return out
    for axis in range(out.ndim):
        n = out.shape[axis]
        if n < 2:
            continue
        out = correlate1d(out, _gaussian_taps(width, n - 1), axis=axis, mode="reflect")
    return out
