"""Experiment grids: phantom x SNR x CS ratio x seed x solver.

Each run is independent and derives its phantom, sensing and noise seeds
from the run seed through ``numpy.random.SeedSequence``, so a grid can be
executed in any order or in parallel with identical results.
"""

import csv
import logging
import os
from io import StringIO
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import io
from .admm import SolverConfig, admm_reconstruct
from .errors import NumericalError
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
from .transforms import HaarWavelet

log = logging.getLogger(__name__)

__all__ = [
    "PHANTOMS",
    "PSFS",
    "SOLVERS",
    "ExperimentSpec",
    "derive_seeds",
    "make_phantom",
    "make_psf",
    "reconstruct",
    "run_one",
    "run_grid",
    "aggregate",
    "format_table",
    "RUN_FIELDS",
]

PHANTOMS = ("shepp_logan", "modified_shepp_logan", "round_cyst", "file")
PSFS = ("gaussian", "gabor", "file")
SOLVERS = ("admm_lp", "admm_gtv", "sequential")

RUN_FIELDS = [
    "run_id", "phantom", "solver", "prior", "snr_db", "cs_ratio", "seed",
    "psnr_db", "ssim_x100", "cnr", "iterations", "converged", "rel_change",
    "residual_ratio", "seconds", "status",
]


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


def _snr(text):
    text = str(text).strip().lower()
    return None if text in ("none", "inf", "") else float(text)


@dataclass
class ExperimentSpec:
    phantom: str = "shepp_logan"
    psf: str = "gaussian"
    cs_ratios: list = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    snr_db: list = field(default_factory=lambda: [40.0])
    solvers: list = field(default_factory=lambda: ["admm_gtv"])
    seeds: list = field(default_factory=lambda: list(range(10)))
    output_dir: str = "experiment"
    size: int = 256
    levels: int = 3
    # phantom
    ggd_shape: float = 1.3
    ggd_scale: float = 1.0
    density: float = 1.0
    cyst_radius: float = 0.2
    attenuation: float = 0.2
    trf_file: str = ""
    # psf
    kernel_size: int = 15
    variance: float = 5.0
    axial_freq: float = 0.175
    axial_sigma: float = 3.0
    lateral_sigma: float = 1.5
    psf_file: str = ""
    # solvers
    p: float = 1.0
    alpha: float = 0.2
    mu: float = 1e-5
    beta: float = 10.0
    gamma: float | None = None
    gtv_p: float = 0.8
    gtv_epsilon: float = 1e-4
    gtv_inner_iter: int = 1
    rel_tol: float = 1e-3
    max_iter: int = 500
    cg_tol: float = 1e-6
    cg_max_iter: int = 200
    # metrics
    region1: str = ""
    region2: str = ""
    save_images: bool = False

    def __post_init__(self):
        if self.phantom not in PHANTOMS:
            raise ValueError(f"unknown phantom {self.phantom!r}; choose from {PHANTOMS}")
        if self.psf not in PSFS:
            raise ValueError(f"unknown psf {self.psf!r}; choose from {PSFS}")
        if not self.cs_ratios:
            raise ValueError("cs_ratios must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if not self.snr_db:
            raise ValueError("snr_db must not be empty")
        for r in self.cs_ratios:
            if not 0 < r <= 1:
                raise ValueError(f"cs ratio {r} outside (0, 1]")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ValueError(f"unknown solver {s!r}; choose from {SOLVERS}")
        if not self.solvers:
            raise ValueError("solvers must not be empty")

    @classmethod
    def from_mapping(cls, raw):
        """Build from string values as read from a config file."""
        conv = {
            "cs_ratios": _floats, "snr_db": lambda t: [_snr(v) for v in str(t).replace(",", " ").split()],
            "seeds": _ints, "solvers": lambda t: str(t).replace(",", " ").split(),
            "solver": lambda t: str(t).replace(",", " ").split(),
            "gamma": lambda t: None if str(t).lower() == "none" else float(t),
            "save_images": lambda t: str(t).lower() in ("1", "true", "yes"),
        }
        kwargs = {}
        names = {f for f in cls.__dataclass_fields__}
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key == "solver":
                key = "solvers"
            if key not in names:
                raise ValueError(f"unknown experiment key {key!r}")
            if key in conv:
                kwargs[key] = conv[key](value)
            elif not isinstance(value, str):
                kwargs[key] = value
            else:
                default = cls.__dataclass_fields__[key].default
                if isinstance(default, bool):
                    kwargs[key] = value.lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    kwargs[key] = int(value)
                elif isinstance(default, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
        return cls(**kwargs)


def derive_seeds(seed):
    """``(phantom_seed, sensing_seed, noise_seed)`` from one run seed."""
    state = np.random.SeedSequence(int(seed)).generate_state(3, dtype=np.uint64)
    return tuple(int(s) for s in state)


def make_phantom(spec, phantom_seed):
    if spec.phantom == "shepp_logan":
        return shepp_logan(spec.size)
    if spec.phantom == "modified_shepp_logan":
        ggd = GgdParams(spec.ggd_shape, spec.ggd_scale, phantom_seed)
        return modified_shepp_logan(spec.size, ggd, spec.density)
    if spec.phantom == "round_cyst":
        return round_cyst_trf(spec.size, spec.cyst_radius, spec.ggd_shape, spec.attenuation,
                              spec.density, phantom_seed)
    return io.read_pfm(spec.trf_file)


def make_psf(spec):
    if spec.psf == "gaussian":
        return gaussian_psf(spec.kernel_size, spec.variance)
    if spec.psf == "gabor":
        return gabor_psf(spec.axial_freq, spec.axial_sigma, spec.lateral_sigma, spec.kernel_size)
    return io.read_pfm(spec.psf_file)


def solver_config(spec, solver):
    if solver == "sequential":
        return SequentialConfig(mu=spec.mu, alpha=spec.alpha, p=spec.p,
                                fista_tol=spec.rel_tol, fista_max_iter=spec.max_iter,
                                fb_tol=spec.rel_tol, fb_max_iter=spec.max_iter)
    return SolverConfig(
        alpha=spec.alpha, mu=spec.mu, beta=spec.beta, gamma=spec.gamma, p=spec.p,
        prior="gtv" if solver == "admm_gtv" else "lp", gtv_p=spec.gtv_p,
        gtv_epsilon=spec.gtv_epsilon, gtv_inner_iter=spec.gtv_inner_iter,
        rel_tol=spec.rel_tol, max_iter=spec.max_iter, cg_tol=spec.cg_tol,
        cg_max_iter=spec.cg_max_iter,
    )


def reconstruct(y, sensing, psf, wavelet, config):
    """Dispatch on the config type; returns ``(x, report)``."""
    if isinstance(config, SequentialConfig):
        return sequential_reconstruct(y, sensing, psf, wavelet, config)
    return admm_reconstruct(y, sensing, psf, wavelet, config)


def _region(text):
    vals = _ints(text)
    if len(vals) != 4:
        raise ValueError(f"region needs row0,col0,height,width; got {text!r}")
    return RegionSpec(*vals)


def _prior_label(spec, solver):
    if solver == "admm_gtv":
        return f"gtv{spec.gtv_p:g}"
    return f"l{spec.p:g}"


def run_one(spec, solver, snr_db, cs_ratio, seed):
    """Run a single grid cell and return its CSV row (never raises)."""
    run_id = f"{spec.phantom}-{solver}-snr{snr_db}-cs{cs_ratio:g}-s{seed}"
    row = {k: "" for k in RUN_FIELDS}
    row.update(run_id=run_id, phantom=spec.phantom, solver=solver,
               prior=_prior_label(spec, solver), snr_db="none" if snr_db is None else snr_db,
               cs_ratio=cs_ratio, seed=seed)
    try:
        phantom_seed, sensing_seed, noise_seed = derive_seeds(seed)
        trf = make_phantom(spec, phantom_seed)
        psf = PsfOperator(make_psf(spec), trf.shape)
        acq = acquire(trf, psf, AcquisitionSpec(cs_ratio, snr_db, sensing_seed, noise_seed))
        wavelet = HaarWavelet(trf.shape, spec.levels)
        x_hat, report = reconstruct(acq.y, acq.sensing, psf, wavelet, solver_config(spec, solver))
        row.update(psnr_db=psnr(trf, x_hat), ssim_x100=100.0 * ssim_global(trf, x_hat),
                   iterations=report.iterations, converged=int(report.converged),
                   seconds=report.seconds, status="ok")
        if hasattr(report, "residual_w"):
            row.update(rel_change=report.rel_change,
                       residual_ratio=report.combined_residual / report.initial_residual)
        else:
            row.update(rel_change=report.deconv.rel_change)
        if spec.region1 and spec.region2:
            row["cnr"] = cnr(x_hat, _region(spec.region1), _region(spec.region2))
        if spec.save_images:
            path = os.path.join(spec.output_dir, run_id + ".pfm")
            io.write_pfm(path, x_hat)
            side = {k: v for k, v in asdict(spec).items()}
            side.update(solver=solver, snr_db=row["snr_db"], cs_ratios=cs_ratio, seeds=seed)
            io.write_config(path + ".cfg", side)
    except (NumericalError, ArithmeticError, ValueError, OSError) as err:
        log.warning("run %s failed: %s", run_id, err)
        row["status"] = f"error: {type(err).__name__}: {err}".replace("\n", " ")
    return row


def _cells(spec):
    for solver in spec.solvers:
        for snr in spec.snr_db:
            for ratio in spec.cs_ratios:
                for seed in spec.seeds:
                    yield solver, snr, ratio, seed


def _run_star(args):
    return run_one(*args)


def run_grid(spec, threads=1):
    """Execute every grid cell; returns the list of per-run rows in grid order."""
    jobs = [(spec,) + cell for cell in _cells(spec)]
    if threads <= 1 or len(jobs) == 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_star, jobs))


AGG_FIELDS = ["phantom", "solver", "prior", "snr_db", "cs_ratio", "runs", "failed",
              "psnr_db", "ssim_x100", "cnr", "iterations", "seconds"]


def aggregate(rows):
    """Arithmetic means of the metric columns per (solver, prior, SNR, CS ratio)."""
    groups = {}
    for row in rows:
        key = (row["phantom"], row["solver"], row["prior"], row["snr_db"], row["cs_ratio"])
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        agg = dict(zip(AGG_FIELDS[:5], key))
        agg.update(runs=len(members), failed=len(members) - len(ok))
        for col in ("psnr_db", "ssim_x100", "cnr", "iterations", "seconds"):
            vals = [float(r[col]) for r in ok if r[col] != ""]
            agg[col] = float(np.mean(vals)) if vals else ""
        out.append(agg)
    return out


def format_table(agg):
    """Plain-text table: one PSNR and one SSIM line per (SNR, solver), CS ratios as columns."""
    ratios = sorted({a["cs_ratio"] for a in agg})
    keys = sorted({(str(a["snr_db"]), a["solver"], a["prior"]) for a in agg})
    lookup = {(str(a["snr_db"]), a["solver"], a["prior"], a["cs_ratio"]): a for a in agg}
    head = f"{'SNR':>6} | {'method':<22} | {'':<5} | " + " | ".join(f"{r * 100:>6.0f}%" for r in ratios)
    lines = [head, "-" * len(head)]
    for snr, solver, prior in keys:
        for metric, label in (("psnr_db", "PSNR"), ("ssim_x100", "SSIM")):
            cells = []
            for r in ratios:
                val = lookup.get((snr, solver, prior, r), {}).get(metric, "")
                cells.append(f"{val:>7.2f}" if val != "" else f"{'n/a':>7}")
            lines.append(f"{snr:>6} | {solver + ' ' + prior:<22} | {label:<5} | " + " | ".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path, rows, fields):
    buf = StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k, "")) for k in fields})
    io.atomic_write(path, buf.getvalue().encode("utf-8"))


def _cell(v):
    if isinstance(v, float):
        return "inf" if v == float("inf") else repr(v)
    return v
