"""scikit-learn style wrappers around the reconstruction routines.

Rows are flattened signals (row-major for separable sensors), so the
objects compose with :class:`sklearn.pipeline.Pipeline`::

    pipe = make_pipeline(SensorMeasurement(sensor), DiffusionReconstructor(sensor))
    pipe.fit(X_train, X_train)      # targets fit the image prior
    X_hat = pipe.transform(X_test)  # measure, then reconstruct

Reconstructors take measurement rows in ``transform``. Their ``fit(Y, X)``
follows the supervised convention: ``X`` (optional) holds clean training
images, used only to fit a learned prior.
"""

from __future__ import annotations

from functools import partial

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import metrics
from ._validation import (check_rows, check_sensor, check_unit_interval, rows_to_measurements,
                          rows_to_signals, signals_to_rows)
from .consistency import CONSISTENCY_MODES, ConsistencyConfig
from .pnp import PnpConfig, geometric_sigmas, pnp_solve
from .priors import DenoiserAdapter, GaussianPrior, fit_dct_gaussian_prior, smoothing_denoiser
from .sampler import reconstruct
from .schedule import build_schedule
from .sensing import SeparableSensor, pseudoinverse_apply

__all__ = [
    "SensorMeasurement",
    "PseudoInverseReconstructor",
    "DiffusionReconstructor",
    "PnPReconstructor",
    "PRIOR_KINDS",
]

PRIOR_KINDS = ("dct-gaussian", "gaussian", "smoothing")


class SensorMeasurement(TransformerMixin, BaseEstimator):
    """Apply the forward model to each row of ``X``."""

    def __init__(self, sensor):
        self.sensor = sensor

    def fit(self, X, y=None):
        sensor = check_sensor(self.sensor)
        check_rows(X, sensor.n_pixels, "signal")
        self.n_features_in_ = sensor.n_pixels
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_rows(X, self.sensor.n_pixels, "signal")
        return signals_to_rows([self.sensor.apply(x) for x in rows_to_signals(X, self.sensor)])


class _Reconstructor(TransformerMixin, BaseEstimator):
    def _reconstruct_one(self, y):
        raise NotImplementedError

    def _prepare(self, X):
        pass

    def fit(self, Y=None, X=None):
        sensor = check_sensor(self.sensor)
        if Y is not None:
            check_rows(Y, sensor.n_measurements, "measurement")
        if X is not None:
            X = check_rows(X, sensor.n_pixels, "target signal")
        self._prepare(X)
        self.n_features_in_ = sensor.n_measurements
        return self

    def transform(self, Y):
        check_is_fitted(self, "n_features_in_")
        Y = check_rows(Y, self.sensor.n_measurements, "measurement")
        return signals_to_rows([self._reconstruct_one(y)
                                for y in rows_to_measurements(Y, self.sensor)])

    def score(self, Y, X):
        """Mean PSNR (dB) of the reconstructions of ``Y`` against clean ``X``, clipped to [0, 1]."""
        X_hat = np.clip(self.transform(Y), 0.0, 1.0)
        X = check_rows(X, self.sensor.n_pixels, "target signal")
        return float(np.mean([metrics.psnr(a, b) for a, b in zip(X, X_hat)]))


class PseudoInverseReconstructor(_Reconstructor):
    """Minimum-norm back-projection ``H^+ y``."""

    def __init__(self, sensor):
        self.sensor = sensor

    def _reconstruct_one(self, y):
        return pseudoinverse_apply(self.sensor, y)


class DiffusionReconstructor(_Reconstructor):
    """Conditional DDIM reconstruction with GAP, HQS or fused data consistency.

    Parameters
    ----------
    sensor : SeparableSensor or DenseSensor
    prior : {"dct-gaussian", "gaussian", "smoothing"} or prior object
        ``"dct-gaussian"`` and ``"gaussian"`` are fitted to the targets passed
        to :meth:`fit` (in the DCT and pixel domain respectively);
        ``"smoothing"`` wraps :func:`~pnpdiff.priors.smoothing_denoiser`. Any
        object with a ``score(x_t, t, schedule)`` method is used as is.
    mode : {"gap", "hqs", "fused"}
    lam : float
        Weight of the proximity term in the HQS step.
    n_steps, beta_min, beta_max : schedule parameters.
    zeta : float
        Stochasticity; 0 gives deterministic DDIM.
    delta : float or None
        Constant fusion weight; ``None`` uses the default ramp.
    random_state : int
        Seeds ``x_T`` (and the step noise when ``zeta > 0``).
    """

    def __init__(self, sensor, prior="dct-gaussian", mode="fused", lam=0.05, n_steps=100,
                 beta_min=1e-3, beta_max=0.2, zeta=0.0, delta=None, smoothing_scale=8.0,
                 random_state=0):
        self.sensor = sensor
        self.prior = prior
        self.mode = mode
        self.lam = lam
        self.n_steps = n_steps
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.zeta = zeta
        self.delta = delta
        self.smoothing_scale = smoothing_scale
        self.random_state = random_state

    def _prepare(self, X):
        if self.mode not in CONSISTENCY_MODES:
            raise ValueError(f"mode must be one of {CONSISTENCY_MODES}, got {self.mode!r}")
        zeta = check_unit_interval(self.zeta, "zeta")
        self.consistency_ = ConsistencyConfig(lam=self.lam, mode=self.mode)
        self.schedule_ = build_schedule(self.n_steps, self.beta_min, self.beta_max, zeta=zeta,
                                        stochastic=zeta > 0, delta=self.delta)
        self.prior_ = self._build_prior(X)

    def _build_prior(self, X):
        if not isinstance(self.prior, str):
            if not callable(getattr(self.prior, "score", None)):
                raise TypeError("prior objects must provide score(x_t, t, schedule)")
            return self.prior
        if self.prior not in PRIOR_KINDS:
            raise ValueError(f"prior must be one of {PRIOR_KINDS} or a prior object")
        if self.prior == "smoothing":
            shape = self.sensor.signal_shape if isinstance(self.sensor, SeparableSensor) else None
            return DenoiserAdapter(partial(smoothing_denoiser, scale=self.smoothing_scale), shape)
        if X is None:
            raise ValueError(f"prior={self.prior!r} is learned: pass clean training signals to fit")
        signals = rows_to_signals(X, self.sensor)
        if self.prior == "gaussian":
            return GaussianPrior.from_samples(signals)
        if signals.ndim != 3:
            raise ValueError("the dct-gaussian prior needs a separable (2D) sensor")
        return fit_dct_gaussian_prior(signals)

    def _reconstruct_one(self, y):
        state = reconstruct(y, self.sensor, self.prior_, self.schedule_, self.consistency_,
                            rng_seed=self.random_state)
        return state.x


class PnPReconstructor(_Reconstructor):
    """Iterative PnP-GAP / PnP-HQS with the smoothing denoiser (or ``denoiser``)."""

    def __init__(self, sensor, variant="gap", gamma=0.1, iterations=50, sigma_max=0.2,
                 sigma_min=0.01, smoothing_scale=8.0, denoiser=None):
        self.sensor = sensor
        self.variant = variant
        self.gamma = gamma
        self.iterations = iterations
        self.sigma_max = sigma_max
        self.sigma_min = sigma_min
        self.smoothing_scale = smoothing_scale
        self.denoiser = denoiser

    def _prepare(self, X):
        sigmas = geometric_sigmas(self.iterations, self.sigma_max, self.sigma_min)
        self.config_ = PnpConfig(self.iterations, self.gamma, sigmas, self.variant)
        if self.denoiser is None:
            self.denoiser_ = DenoiserAdapter(partial(smoothing_denoiser, scale=self.smoothing_scale))
        else:
            self.denoiser_ = self.denoiser

    def _reconstruct_one(self, y):
        return pnp_solve(y, self.sensor, self.denoiser_, self.config_)
