"""Compression-ratio sweeps over reconstruction methods."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import metrics
from ..estimators import DiffusionReconstructor, PnPReconstructor, PseudoInverseReconstructor
from ..priors import GaussianPrior, fit_dct_gaussian_prior
from ..sampler import reconstruct, write_trace_csv
from ..sensing import build_separable_sensor
from .pgm import export_image, import_image
from .phantoms import generate_phantom

__all__ = ["RunRecord", "run_experiment", "sensor_side", "OUTPUT_ENV", "RUN_FIELDS", "SUMMARY_FIELDS"]

log = logging.getLogger(__name__)

OUTPUT_ENV = "PNPDIFF_OUTPUT_DIR"
RUN_FIELDS = ("image", "cr", "measured_cr", "method", "seed", "psnr", "ssim", "residual")
SUMMARY_FIELDS = ("cr", "method", "count", "psnr", "ssim", "residual")


@dataclass
class RunRecord:
    config_hash: str
    rows: list
    summary: list
    wall_time: float
    paths: dict = field(default_factory=dict)


def sensor_side(cr, size):
    """Rows per sensing factor so that ``(side / size)^2`` is closest to ``cr``."""
    return int(min(size, max(1, round(math.sqrt(cr) * size))))


def _load_images(cfg):
    if cfg.images:
        out = []
        for p in cfg.images:
            img = import_image(p)
            if img.shape[0] != img.shape[1]:
                raise ValueError(f"{p}: only square images are supported, got {img.shape}")
            out.append((Path(p).stem, img))
        return out
    return [(f"{cfg.phantom}-{cfg.image_seed + i}",
             generate_phantom(cfg.phantom, cfg.size, cfg.image_seed + i))
            for i in range(cfg.n_images)]


def _fit_prior(cfg, size):
    kind = cfg.prior_phantom or cfg.phantom
    train = np.stack([generate_phantom(kind, size, cfg.prior_seed + i)
                      for i in range(cfg.prior_train)])
    if cfg.prior == "dct-gaussian":
        return fit_dct_gaussian_prior(train)
    return GaussianPrior.from_samples(train)


def _make_estimator(method, sensor, cfg, prior, seed):
    if method == "pinv":
        return PseudoInverseReconstructor(sensor)
    if method.startswith("ddim-"):
        return DiffusionReconstructor(
            sensor, prior=prior, mode=method[5:], lam=cfg.lam, n_steps=cfg.T,
            beta_min=cfg.beta_min, beta_max=cfg.beta_max, zeta=cfg.zeta, delta=cfg.delta,
            smoothing_scale=cfg.smoothing_scale, random_state=seed)
    return PnPReconstructor(
        sensor, variant=method[4:], gamma=cfg.pnp_gamma, iterations=cfg.pnp_iterations,
        sigma_max=cfg.pnp_sigma_max, sigma_min=cfg.pnp_sigma_min,
        smoothing_scale=cfg.smoothing_scale)


def _run_cell(cell, cfg, prior, out_dir):
    name, image, cr, method, seed = cell
    size = image.shape[0]
    sensor = build_separable_sensor(sensor_side(cr, size), size, cfg.sensor, cfg.sensor_seed)
    y = sensor.apply(image)
    est = _make_estimator(method, sensor, cfg, prior, seed).fit()
    if cfg.trace and method.startswith("ddim-"):
        state = reconstruct(y, sensor, est.prior_, est.schedule_, est.consistency_,
                            rng_seed=seed, trace=True, ground_truth=image)
        x_hat = state.x
        write_trace_csv(state, out_dir / "traces" / f"{name}_cr{cr:g}_{method}_s{seed}.csv")
    else:
        x_hat = est.transform(y.reshape(1, -1)).reshape(image.shape)
    shown = np.clip(x_hat, 0.0, 1.0)
    if cfg.save_images:
        export_image(x_hat, out_dir / "images" / f"{name}_cr{cr:g}_{method}_s{seed}.pgm")
    residual = float(np.linalg.norm(y - sensor.apply(x_hat)) / max(np.linalg.norm(y), 1e-300))
    return {
        "image": name, "cr": cr, "measured_cr": sensor.compression_ratio, "method": method,
        "seed": seed, "psnr": metrics.psnr(image, shown), "ssim": metrics.ssim(image, shown),
        "residual": residual,
    }


def _summarize(rows, cfg):
    summary = []
    for cr in cfg.cr:
        for method in cfg.methods:
            cell = [r for r in rows if r["cr"] == cr and r["method"] == method]
            summary.append({
                "cr": cr, "method": method, "count": len(cell),
                "psnr": float(np.mean([r["psnr"] for r in cell])),
                "ssim": float(np.mean([r["ssim"] for r in cell])),
                "residual": float(np.mean([r["residual"] for r in cell])),
            })
    return summary


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in fieldnames])


def run_experiment(cfg, output_dir=None, n_jobs=None):
    """Run every ``(image, cr, method, seed)`` cell and write the result tables.

    Output directory precedence: ``output_dir`` argument, then the
    ``PNPDIFF_OUTPUT_DIR`` environment variable, then ``cfg.output``.
    Writes ``runs.csv``, ``summary.csv``, ``record.json`` and (optionally)
    reconstructed images. Row order is fixed by the config, whatever the
    number of worker threads.
    """
    start = time.perf_counter()
    out_dir = Path(output_dir or os.environ.get(OUTPUT_ENV) or cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.save_images:
        (out_dir / "images").mkdir(exist_ok=True)
    if cfg.trace:
        (out_dir / "traces").mkdir(exist_ok=True)

    images = _load_images(cfg)
    sizes = {img.shape[0] for _, img in images}
    needs_prior = cfg.prior != "smoothing" and any(m.startswith("ddim-") for m in cfg.methods)
    priors = {s: (_fit_prior(cfg, s) if needs_prior else cfg.prior) for s in sizes}

    cells = [(name, img, cr, method, seed)
             for name, img in images for cr in cfg.cr for method in cfg.methods
             for seed in cfg.seeds]
    jobs = n_jobs or cfg.n_jobs
    log.info("running %d cells with %d worker(s)", len(cells), jobs)

    def work(cell):
        return _run_cell(cell, cfg, priors[cell[1].shape[0]], out_dir)

    if jobs == 1:
        rows = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, cells))

    summary = _summarize(rows, cfg)
    paths = {"runs": str(out_dir / "runs.csv"), "summary": str(out_dir / "summary.csv"),
             "record": str(out_dir / "record.json")}
    _write_csv(paths["runs"], RUN_FIELDS, rows)
    _write_csv(paths["summary"], SUMMARY_FIELDS, summary)
    record = RunRecord(cfg.config_hash(), rows, summary, time.perf_counter() - start, paths)
    with open(paths["record"], "w") as fh:
        json.dump({"config_hash": record.config_hash, "config": cfg.canonical(),
                   "wall_time": record.wall_time, "paths": paths}, fh, indent=2, sort_keys=True)
    return record
