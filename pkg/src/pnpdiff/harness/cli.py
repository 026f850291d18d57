"""Command line entry point: ``pnpdiff {run,phantom,metrics,sensor}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .. import metrics
from ..sensing import SENSOR_KINDS, build_separable_sensor, save_sensor
from .config import load_config
from .experiment import run_experiment
from .pgm import export_image, import_image
from .phantoms import PHANTOM_KINDS, generate_phantom


def _cmd_run(args):
    cfg = load_config(args.config)
    record = run_experiment(cfg, output_dir=args.output, n_jobs=args.jobs)
    for row in record.summary:
        print(f"cr={row['cr']:<6g} {row['method']:<11} psnr={row['psnr']:.2f} dB "
              f"ssim={row['ssim']:.4f} (n={row['count']})")
    print(f"wrote {record.paths['summary']}")


def _cmd_phantom(args):
    grid = generate_phantom(args.kind, args.size, args.seed)
    export_image(grid, args.out)
    print(f"wrote {args.out}")


def _cmd_metrics(args):
    ref = import_image(args.reference)
    test = import_image(args.test)
    print(f"psnr={metrics.psnr(ref, test):.6f}")
    print(f"ssim={metrics.ssim(ref, test):.6f}")


def _cmd_sensor(args):
    sensor = build_separable_sensor(args.sqrt_m, args.sqrt_n, args.kind, args.seed)
    save_sensor(sensor, args.out, include_matrices=not args.no_matrices)
    print(f"wrote {args.out} (cr={sensor.compression_ratio:.6f})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pnpdiff", description="Diffusion / plug-and-play reconstruction for compressive imaging.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a compression-ratio sweep from a config file")
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--output", help="output directory (overrides config and environment)")
    p.add_argument("--jobs", type=int, help="worker threads")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("phantom", help="generate a phantom and write it as PGM")
    p.add_argument("--kind", choices=PHANTOM_KINDS, default="smooth-bumps")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("metrics", help="PSNR and SSIM between two PGM images")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sensor", help="build a separable sensor and serialize it")
    p.add_argument("--sqrt-m", type=int, required=True)
    p.add_argument("--sqrt-n", type=int, required=True)
    p.add_argument("--kind", choices=SENSOR_KINDS, default="orthonormal-random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-matrices", action="store_true",
                   help="store only kind/seed/dimensions; matrices are rebuilt on load")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sensor)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"pnpdiff: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
