"""Synthetic test images in [0, 1]."""

from __future__ import annotations

import numpy as np

__all__ = ["generate_phantom", "PHANTOM_KINDS", "MIN_PHANTOM_SIZE"]

PHANTOM_KINDS = ("smooth-bumps", "piecewise-constant", "checker")
MIN_PHANTOM_SIZE = 16


def _smooth_bumps(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size))
    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0.15, 0.85, 2)
        width = rng.uniform(0.08, 0.25)
        img += rng.uniform(0.4, 1.0) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width ** 2))
    lo, hi = img.min(), img.max()
    return 0.1 + 0.8 * (img - lo) / (hi - lo)


def _piecewise_constant(rng, size):
    # Voronoi cells with one gray level each
    k = int(rng.integers(3, 9))
    centers = rng.uniform(0, size, (k, 2))
    levels = rng.choice(np.linspace(0.1, 0.9, 9), size=k, replace=False)
    yy, xx = np.mgrid[0:size, 0:size]
    d = (yy[..., None] - centers[:, 0]) ** 2 + (xx[..., None] - centers[:, 1]) ** 2
    return levels[np.argmin(d, axis=-1)]


def _checker(size):
    block = max(size // 8, 1)
    idx = np.arange(size) // block
    return np.where((idx[:, None] + idx[None, :]) % 2 == 0, 0.2, 0.8)


def generate_phantom(kind="smooth-bumps", size=64, seed=0):
    """Deterministic ``size x size`` phantom for a given ``(kind, size, seed)``."""
    size = int(size)
    if size < MIN_PHANTOM_SIZE:
        raise ValueError(f"phantom size must be at least {MIN_PHANTOM_SIZE}, got {size}")
    rng = np.random.default_rng(seed)
    if kind == "smooth-bumps":
        return _smooth_bumps(rng, size)
    if kind == "piecewise-constant":
        return _piecewise_constant(rng, size)
    if kind == "checker":
        return _checker(size)
    raise ValueError(f"unknown phantom kind {kind!r}; expected one of {PHANTOM_KINDS}")
