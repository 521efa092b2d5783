"""Joint compressive sensing and deconvolution of ultrasound-like images."""

__version__ = "0.1.0"

from .admm import SolverConfig, admm_reconstruct
from .metrics import cnr, psnr, ssim_global
from .operators import PsfOperator
from .phantoms import AcquisitionSpec, acquire, gabor_psf, gaussian_psf, shepp_logan
from .sequential import SequentialConfig, sequential_reconstruct
from .transforms import HaarWavelet, SensingOperator

__all__ = [
    "SolverConfig",
    "admm_reconstruct",
    "SequentialConfig",
    "sequential_reconstruct",
    "PsfOperator",
    "HaarWavelet",
    "SensingOperator",
    "AcquisitionSpec",
    "acquire",
    "shepp_logan",
    "gaussian_psf",
    "gabor_psf",
    "psnr",
    "ssim_global",
    "cnr",
]
