"""Command line interface: ``csdecon <command> [options]``.

Commands: phantom, psf, acquire, reconstruct, metrics, experiment.
Every option can also come from a flat ``key = value`` file passed with
``--config``; explicit flags win. Exit codes: 0 success, 1 numerical
failure, 2 validation or I/O error.
"""

import argparse
import csv
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, io
from .admm import SolverConfig, admm_reconstruct
from .errors import NumericalError, SingularityError, SizeError
from .experiment import (
    AGG_FIELDS,
    RUN_FIELDS,
    ExperimentSpec,
    aggregate,
    format_table,
    run_grid,
    write_csv,
)
from .metrics import RegionSpec, cnr, psnr, ssim_global
from .operators import PsfOperator
from .phantoms import (
    AcquisitionSpec,
    GgdParams,
    acquire,
    gabor_psf,
    gaussian_psf,
    modified_shepp_logan,
    round_cyst_trf,
    shepp_logan,
)
from .sequential import SequentialConfig, sequential_reconstruct
from .transforms import HaarWavelet, SensingOperator

log = logging.getLogger("csdecon")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

# keys a sidecar may carry that are records, not options
_RECORD_KEYS = {"command", "realized_snr_db", "measurements", "version"}

METRIC_FIELDS = ["experiment_id", "cs_ratio", "prior", "psnr_db", "ssim_x100", "cnr",
                 "iterations", "seconds"]


class UsageError(Exception):
    """Invalid arguments or inputs (exit code 2)."""


def _snr(text):
    if str(text).strip().lower() in ("none", "inf", "off"):
        return None
    return float(text)


def _region(text):
    try:
        vals = [int(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad region {text!r}")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("region must be row0,col0,height,width")
    return RegionSpec(*vals)


def _optional_float(text):
    return None if str(text).strip().lower() == "none" else float(text)


def _global_flags(p):
    p.add_argument("--seed", type=int, default=0, help="base random seed (unsigned 64-bit)")
    p.add_argument("--out", help="output path")
    p.add_argument("--config", help="flat key = value file supplying option defaults")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $CSDECON_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="csdecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a ground-truth reflectivity image")
    _global_flags(p)
    p.add_argument("--kind", default="shepp-logan",
                   choices=["shepp-logan", "modified-shepp-logan", "round-cyst"])
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--ggd-shape", type=float, default=None,
                   help="GGD shape (default 1.3, or 1 for round-cyst)")
    p.add_argument("--ggd-scale", type=float, default=1.0)
    p.add_argument("--density", type=float, default=1.0, help="scatterers per pixel")
    p.add_argument("--cyst-radius", type=float, default=0.2, help="radius / image size")
    p.add_argument("--attenuation", type=float, default=0.2, help="echogenicity inside the cyst")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("psf", help="generate a point spread function")
    _global_flags(p)
    p.add_argument("--kind", default="gaussian", choices=["gaussian", "gabor"])
    p.add_argument("--kernel-size", type=int, default=None)
    p.add_argument("--variance", type=float, default=5.0, help="gaussian variance (px^2)")
    p.add_argument("--axial-freq", type=float, default=0.175, help="cycles per sample")
    p.add_argument("--axial-sigma", type=float, default=3.0)
    p.add_argument("--lateral-sigma", type=float, default=1.5)
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("acquire", help="simulate compressed, blurred, noisy measurements")
    _global_flags(p)
    p.add_argument("--trf", required=False, help="ground-truth PFM")
    p.add_argument("--psf", required=False, help="PSF kernel PFM")
    p.add_argument("--cs-ratio", type=float, default=0.5)
    p.add_argument("--snr-db", type=_snr, default=40.0, help="dB, or 'none' for noiseless")
    p.add_argument("--sensing-seed", type=int, default=None, help="default: --seed")
    p.add_argument("--noise-seed", type=int, default=None, help="default: --seed + 1")
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("reconstruct", help="recover the reflectivity from measurements")
    _global_flags(p)
    p.add_argument("--measurements", help="measurement file from 'acquire'")
    p.add_argument("--psf", help="PSF kernel PFM")
    p.add_argument("--solver", default="admm",
                   choices=["admm", "admm_lp", "admm_gtv", "sequential"])
    p.add_argument("--prior", default=None, choices=["lp", "gtv"])
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--mu", type=float, default=1e-5)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--gamma", type=_optional_float, default=None)
    p.add_argument("--gtv-p", type=float, default=0.8)
    p.add_argument("--gtv-epsilon", type=float, default=1e-4)
    p.add_argument("--gtv-inner-iter", type=int, default=1)
    p.add_argument("--cg-tol", type=float, default=1e-6)
    p.add_argument("--cg-max-iter", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--levels", type=int, default=3, help="Haar decomposition levels")
    p.add_argument("--dynamic-range", type=float, default=40.0, help="display range in dB")
    p.add_argument("--report", help="CSV file to append the convergence row to")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="compare a reconstruction with the ground truth")
    _global_flags(p)
    p.add_argument("--truth", help="reference PFM (required for PSNR/SSIM)")
    p.add_argument("--estimate", help="reconstructed PFM")
    p.add_argument("--region1", type=_region, help="row0,col0,height,width")
    p.add_argument("--region2", type=_region, help="row0,col0,height,width")
    p.add_argument("--raw-cnr", action="store_true", help="CNR on raw values, not |x|")
    p.add_argument("--experiment-id", default="")
    p.add_argument("--cs-ratio", default="")
    p.add_argument("--prior", default="")
    p.add_argument("--iterations", default="")
    p.add_argument("--seconds", default="")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="run an experiment grid from a spec file")
    _global_flags(p)
    p.add_argument("spec", help="flat key = value experiment description")
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_config(parser, argv):
    """Load ``--config`` into subparser defaults, then parse ``argv`` for real."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    try:
        raw = io.read_config(known.config)
    except OSError as err:
        raise UsageError(f"cannot read config {known.config}: {err}")
    cmd = next((a for a in argv if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if cmd not in subparsers.choices:
        return parser.parse_args(argv)
    subparser = subparsers.choices[cmd]
    dests = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in raw.items():
        if key in _RECORD_KEYS:
            continue
        if key not in dests or key in ("config", "help"):
            raise UsageError(f"{known.config}: unknown option {key!r} for '{cmd}'")
        action = dests[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes")
        elif value.lower() == "none" and action.type not in (_snr, _optional_float):
            defaults[key] = None
        else:
            defaults[key] = value
    # argparse converts string defaults through the option's type
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CSDECON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"CSDECON_THREADS must be an integer, got {env!r}")
    return 1


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _require_files(*paths):
    for path in paths:
        if not os.path.isfile(path):
            raise UsageError(f"input file not found: {path}")


def _record(args, exclude=("func", "config", "threads", "verbose")):
    rec = {k: v for k, v in vars(args).items() if k not in exclude}
    for k, v in rec.items():
        if isinstance(v, RegionSpec):
            rec[k] = f"{v.row0},{v.col0},{v.height},{v.width}"
    return rec


def cmd_phantom(args):
    _require(args, "out")
    if args.kind == "shepp-logan":
        img = shepp_logan(args.size)
    elif args.kind == "modified-shepp-logan":
        if args.ggd_shape is None:
            args.ggd_shape = 1.3
        img = modified_shepp_logan(args.size, GgdParams(args.ggd_shape, args.ggd_scale, args.seed),
                                   args.density)
    else:
        if args.ggd_shape is None:
            args.ggd_shape = 1.0
        img = round_cyst_trf(args.size, args.cyst_radius, args.ggd_shape, args.attenuation,
                             args.density, args.seed)
    io.write_pfm(args.out, img)
    io.write_config(args.out + ".cfg", _record(args))
    log.info("wrote %s (%dx%d, max %.4g)", args.out, *img.shape, img.max())
    return EXIT_OK


def cmd_psf(args):
    _require(args, "out")
    if args.kind == "gaussian":
        size = 15 if args.kernel_size is None else args.kernel_size
        kernel = gaussian_psf(size, args.variance)
    else:
        size = 21 if args.kernel_size is None else args.kernel_size
        kernel = gabor_psf(args.axial_freq, args.axial_sigma, args.lateral_sigma, size)
    args.kernel_size = size
    io.write_pfm(args.out, kernel)
    io.write_config(args.out + ".cfg", _record(args))
    return EXIT_OK


def _read_image(path, what):
    try:
        return io.read_pfm(path)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read {what} {path}: {err}")


def cmd_acquire(args):
    _require(args, "trf", "psf", "out")
    _require_files(args.trf, args.psf)
    trf = _read_image(args.trf, "TRF")
    kernel = _read_image(args.psf, "PSF")
    if kernel.shape[0] > trf.shape[0] or kernel.shape[1] > trf.shape[1]:
        raise UsageError(f"PSF {kernel.shape} is larger than the TRF grid {trf.shape}")
    if args.sensing_seed is None:
        args.sensing_seed = args.seed
    if args.noise_seed is None:
        args.noise_seed = args.seed + 1
    spec = AcquisitionSpec(args.cs_ratio, args.snr_db, args.sensing_seed, args.noise_seed)
    acq = acquire(trf, PsfOperator(kernel, trf.shape), spec)
    io.write_measurements(args.out, acq.y, trf.shape, args.cs_ratio, args.sensing_seed,
                          args.noise_seed, args.snr_db)
    rec = _record(args)
    rec["realized_snr_db"] = acq.realized_snr_db
    io.write_config(args.out + ".cfg", rec)
    if acq.realized_snr_db is not None:
        log.info("M = %d, realized SNR %.3f dB", acq.y.size, acq.realized_snr_db)
    return EXIT_OK


def _solver_config(args):
    solver = args.solver
    if solver == "sequential":
        return SequentialConfig(mu=args.mu, alpha=args.alpha, p=args.p, fista_tol=args.rel_tol,
                                fista_max_iter=args.max_iter, fb_tol=args.rel_tol,
                                fb_max_iter=args.max_iter)
    prior = args.prior
    if solver == "admm_gtv":
        prior = "gtv"
    elif prior is None:
        prior = "lp"
    return SolverConfig(alpha=args.alpha, mu=args.mu, beta=args.beta, gamma=args.gamma,
                        p=args.p, prior=prior, gtv_p=args.gtv_p, gtv_epsilon=args.gtv_epsilon,
                        gtv_inner_iter=args.gtv_inner_iter, rel_tol=args.rel_tol,
                        max_iter=args.max_iter, cg_tol=args.cg_tol, cg_max_iter=args.cg_max_iter)


def _append_csv(path, row, fields):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        if new:
            writer.writeheader()
        writer.writerow(row)


def _fmt_cell(v):
    if isinstance(v, float):
        return "inf" if v == float("inf") else f"{v:.6g}"
    return v


def cmd_reconstruct(args):
    _require(args, "measurements", "psf", "out")
    _require_files(args.measurements, args.psf)
    try:
        y, header = io.read_measurements(args.measurements)
    except (OSError, ValueError) as err:
        raise UsageError(str(err))
    kernel = _read_image(args.psf, "PSF")
    shape = header["shape"]
    config = _solver_config(args)
    try:
        psf = PsfOperator(kernel, shape)
        wavelet = HaarWavelet(shape, args.levels)
    except SizeError as err:
        raise UsageError(str(err))
    sensing = SensingOperator(shape, header["length"], header["sensing_seed"])
    if isinstance(config, SequentialConfig):
        x, report = sequential_reconstruct(y, sensing, psf, wavelet, config)
    else:
        x, report = admm_reconstruct(y, sensing, psf, wavelet, config)
    io.write_pfm(args.out, x)
    stem = os.path.splitext(args.out)[0]
    io.write_pgm(stem + ".pgm", x, args.dynamic_range)
    rec = _record(args)
    rec["measurements"] = args.measurements
    io.write_config(args.out + ".cfg", rec)
    row = {"output": args.out, "solver": args.solver,
           "prior": "gtv" if getattr(config, "prior", "lp") == "gtv" else f"l{args.p:g}",
           "cs_ratio": header["cs_ratio"]}
    row.update(report.as_row())
    row = {k: _fmt_cell(v) for k, v in row.items()}
    _append_csv(args.report or stem + ".csv", row, list(row))
    if not report.converged:
        log.warning("solver stopped after %d iterations without meeting the tolerance",
                    report.iterations)
    return EXIT_OK


def cmd_metrics(args):
    _require(args, "estimate")
    _require_files(args.estimate, *([args.truth] if args.truth else []))
    est = _read_image(args.estimate, "estimate")
    row = {k: "" for k in METRIC_FIELDS}
    row.update(experiment_id=args.experiment_id, cs_ratio=args.cs_ratio, prior=args.prior,
               iterations=args.iterations, seconds=args.seconds)
    if args.truth:
        truth = _read_image(args.truth, "truth")
        if truth.shape != est.shape:
            raise UsageError(f"image sizes differ: {truth.shape} vs {est.shape}")
        row["psnr_db"] = _fmt_psnr(psnr(truth, est))
        row["ssim_x100"] = f"{100.0 * ssim_global(truth, est):.2f}"
    if (args.region1 is None) != (args.region2 is None):
        raise UsageError("CNR needs both --region1 and --region2")
    if args.region1 is not None:
        try:
            row["cnr"] = f"{cnr(est, args.region1, args.region2, envelope=not args.raw_cnr):.4f}"
        except ValueError as err:
            raise UsageError(str(err))
    if args.out:
        _append_csv(args.out, row, METRIC_FIELDS)
    writer = csv.DictWriter(sys.stdout, fieldnames=METRIC_FIELDS, lineterminator="\n")
    writer.writerow(row)
    return EXIT_OK


def _fmt_psnr(value):
    return "inf" if value == float("inf") else f"{value:.4f}"


def cmd_experiment(args):
    _require_files(args.spec)
    try:
        raw = io.read_config(args.spec)
        if args.out:
            raw["output_dir"] = args.out
        spec = ExperimentSpec.from_mapping(raw)
    except (OSError, ValueError, TypeError) as err:
        raise UsageError(f"invalid experiment spec {args.spec}: {err}")
    os.makedirs(spec.output_dir, exist_ok=True)
    rows = run_grid(spec, _threads(args))
    agg = aggregate(rows)
    write_csv(os.path.join(spec.output_dir, "runs.csv"), rows, RUN_FIELDS)
    write_csv(os.path.join(spec.output_dir, "aggregate.csv"), agg, AGG_FIELDS)
    table = format_table(agg)
    io.atomic_write(os.path.join(spec.output_dir, "table.txt"), table.encode("utf-8"))
    side = asdict(spec)
    io.write_config(os.path.join(spec.output_dir, "experiment.cfg"), side)
    sys.stdout.write(table)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d runs failed; see runs.csv", failed, len(rows))
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as err:
        print(f"csdecon: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"csdecon: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, SingularityError) as err:
        step = getattr(err, "step", None)
        where = f" in {step}" if step else ""
        print(f"csdecon: numerical failure{where}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as err:
        print(f"csdecon: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
