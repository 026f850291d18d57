"""Data-consistency corrections applied to a denoised estimate.

All updates work on either sensor flavour: flat vectors with a
:class:`~pnpdiff.sensing.DenseSensor`, signal grids with a
:class:`~pnpdiff.sensing.SeparableSensor`.

Both the back-projection and the regularized least-squares step are written
in residual form, which only needs a solve with ``H H^T + lam I``
(``m x m``) instead of ``H^T H + lam I`` (``n x n``)::

    (H^T H + lam I)^{-1} (H^T y + lam x) = x + H^T (H H^T + lam I)^{-1} (y - H x)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sensing import SeparableSensor

__all__ = [
    "ConsistencyConfig",
    "CONSISTENCY_MODES",
    "gap_update",
    "hqs_update",
    "fused_update",
    "fused_update_separable",
    "fused_gain",
    "consistency_step_size",
    "apply_consistency",
]

CONSISTENCY_MODES = ("gap", "hqs", "fused")


@dataclass(frozen=True)
class ConsistencyConfig:
    """Consistency settings: HQS weight ``lam``, fusion weight ``delta``, ``mode``.

    ``mode="gap"`` is fused with ``delta=0`` and ``mode="hqs"`` is fused with
    ``delta=1``; :attr:`effective_delta` reports the weight actually used.
    """

    lam: float = 1.0
    delta: float = 0.5
    mode: str = "fused"

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive and finite, got {self.lam}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.mode not in CONSISTENCY_MODES:
            raise ValueError(f"mode must be one of {CONSISTENCY_MODES}, got {self.mode!r}")

    @property
    def effective_delta(self):
        return {"gap": 0.0, "hqs": 1.0}.get(self.mode, self.delta)

    def with_delta(self, delta):
        return ConsistencyConfig(lam=self.lam, delta=float(delta), mode=self.mode)


def _residual_correction(sensor, x, y, lam):
    """Return ``H^T (H H^T + lam I)^{-1} (y - H x)``."""
    r = np.asarray(y, dtype=np.float64) - sensor.apply(x)
    return sensor.adjoint(sensor.solve_gram(r, lam))


def gap_update(sensor, x0t, y):
    """Back-project onto ``{x : H x = y}``: ``x + H^+ (y - H x)``."""
    x0t = np.asarray(x0t, dtype=np.float64)
    return x0t + _residual_correction(sensor, x0t, y, 0.0)


def hqs_update(sensor, x0t, y, lam):
    """Solve ``min_x 1/2 ||y - H x||^2 + lam/2 ||x - x0t||^2`` in closed form."""
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    x0t = np.asarray(x0t, dtype=np.float64)
    return x0t + _residual_correction(sensor, x0t, y, float(lam))


def fused_update(sensor, x0t, y, cfg):
    """Convex blend ``(1 - delta) * gap + delta * hqs``."""
    d = cfg.effective_delta
    x0t = np.asarray(x0t, dtype=np.float64)
    if d == 0.0:
        return gap_update(sensor, x0t, y)
    if d == 1.0:
        return hqs_update(sensor, x0t, y, cfg.lam)
    return (1.0 - d) * gap_update(sensor, x0t, y) + d * hqs_update(sensor, x0t, y, cfg.lam)


def fused_gain(lam, delta):
    """Back-projection gain ``1 - lam * delta / (1 + lam)`` of the separable fast path."""
    return 1.0 - lam * delta / (1.0 + lam)


def fused_update_separable(sensor, X0t, Y, cfg):
    """Single back-projection ``X + rho U^T (Y - U X V^T) V``.

    With ``U U^T = I`` and ``V V^T = I`` this equals :func:`fused_update`
    exactly, because ``(H H^T + lam I)^{-1} = I / (1 + lam)``.
    """
    if not isinstance(sensor, SeparableSensor):
        raise TypeError("fused_update_separable needs a SeparableSensor")
    if not sensor.orthogonal_rows:
        raise ValueError("fast fused update is only valid for row-orthogonal sensors")
    X0t = np.asarray(X0t, dtype=np.float64)
    rho = fused_gain(cfg.lam, cfg.effective_delta)
    R = np.asarray(Y, dtype=np.float64) - sensor.apply(X0t)
    return X0t + rho * sensor.adjoint(R)


def apply_consistency(sensor, x0t, y, cfg):
    """Dispatch to the fast separable path when it is valid."""
    if isinstance(sensor, SeparableSensor) and sensor.orthogonal_rows:
        return fused_update_separable(sensor, x0t, y, cfg)
    return fused_update(sensor, x0t, y, cfg)


def consistency_step_size(schedule, t):
    """Gradient step size ``mu_t`` of the likelihood-gradient form of the update.

    ``sqrt((1 - a_{t-1} - sigma_t^2)(1 - a_t) / a_t)`` with ``a`` the
    cumulative ``alpha_bar``. Informational only: the sampler applies the
    full proximal/projection updates instead.
    """
    a_t = schedule.alpha_bar[t]
    a_prev = schedule.alpha_bar[t - 1]
    s = schedule.sigma[t - 1]
    return math.sqrt(max(1.0 - a_prev - s * s, 0.0) * (1.0 - a_t) / a_t)
