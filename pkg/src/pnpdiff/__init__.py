"""Plug-and-play data consistency inside diffusion sampling, for compressive imaging."""

from .consistency import (ConsistencyConfig, fused_update, fused_update_separable, gap_update,
                          hqs_update)
from .estimators import (DiffusionReconstructor, PnPReconstructor, PseudoInverseReconstructor,
                         SensorMeasurement)
from .metrics import MetricReport, psnr, ssim
from .pnp import PnpConfig, pnp_solve
from .priors import (DCTPrior, DenoiserAdapter, GaussianPrior, fit_dct_gaussian_prior,
                     smoothing_denoiser, tweedie_denoise)
from .sampler import ddim_step, reconstruct
from .schedule import DiffusionSchedule, build_schedule, forward_noise
from .sensing import (DenseSensor, SeparableSensor, build_separable_sensor, densify,
                      load_sensor, pseudoinverse_apply, save_sensor)

__version__ = "0.1.0"
