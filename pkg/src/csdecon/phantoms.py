"""Ground-truth images, point spread functions and measurement simulation."""

from dataclasses import dataclass

import numpy as np

from .operators import PsfOperator, as_image
from .transforms import SensingOperator

__all__ = [
    "SHEPP_LOGAN_ELLIPSES",
    "GgdParams",
    "AcquisitionSpec",
    "Acquisition",
    "shepp_logan",
    "sample_ggd",
    "speckle_trf",
    "modified_shepp_logan",
    "round_cyst_trf",
    "gaussian_psf",
    "gabor_psf",
    "measurement_count",
    "acquire",
]

# Ten-ellipse head phantom with the higher-contrast intensities of Toft's
# modification: (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees).
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def shepp_logan(n):
    """Shepp-Logan head phantom on an ``n x n`` grid, scaled to [0, 1].

    Pixel centers sample ``[-1, 1]^2``; row 0 is the top of the head
    (``y = +1``).
    """
    n = int(n)
    if n < 16:
        raise ValueError("phantom size must be at least 16")
    coords = (2.0 * np.arange(n) + 1.0) / n - 1.0
    xx, yy = np.meshgrid(coords, coords[::-1])
    img = np.zeros((n, n))
    for rho, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        t = np.deg2rad(phi)
        dx, dy = xx - x0, yy - y0
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += rho
    # snap away cancellation residue such as 1 - 0.8 - 0.2
    img = np.round(img, 12)
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


@dataclass(frozen=True)
class GgdParams:
    """Zero-mean generalized Gaussian with density ``~ exp(-|x / scale|^shape)``."""

    shape: float = 1.3
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.shape > 0 or not self.scale > 0:
            raise ValueError("GGD shape and scale must be positive")


def _rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def _ggd(rng, shape, scale, count):
    g = rng.gamma(1.0 / shape, 1.0, size=count)
    sign = rng.choice(np.array([-1.0, 1.0]), size=count)
    return sign * g ** (1.0 / shape) * scale


def sample_ggd(params, count):
    """Draw ``count`` i.i.d. GGD samples, deterministic in ``params.seed``."""
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    return _ggd(_rng(params.seed), params.shape, params.scale, count)


def speckle_trf(base, scatterer_density, ggd):
    """Scatter GGD-amplitude point reflectors over ``base``.

    A Poisson number of scatterers (mean ``density * N``) is placed at
    uniform continuous positions. Each amplitude is multiplied by the base
    value of the nearest pixel and accumulated into that pixel.
    """
    base = as_image(base, "base")
    if not scatterer_density > 0:
        raise ValueError("scatterer density must be positive")
    height, width = base.shape
    rng = _rng(ggd.seed)
    count = int(rng.poisson(scatterer_density * base.size))
    out = np.zeros(base.size)
    if count == 0:
        return out.reshape(base.shape)
    rows = np.minimum(np.floor(rng.uniform(0.0, height, count)).astype(np.int64), height - 1)
    cols = np.minimum(np.floor(rng.uniform(0.0, width, count)).astype(np.int64), width - 1)
    amp = _ggd(rng, ggd.shape, ggd.scale, count)
    flat = rows * width + cols
    out += np.bincount(flat, weights=amp * base.ravel()[flat], minlength=base.size)
    return out.reshape(base.shape)


def modified_shepp_logan(n, ggd=GgdParams(), scatterer_density=1.0):
    """Speckle version of :func:`shepp_logan`."""
    return speckle_trf(shepp_logan(n), scatterer_density, ggd)


def round_cyst_trf(n, cyst_radius_fraction=0.2, ggd_shape=1.0, attenuation=0.2,
                   scatterer_density=1.0, seed=0):
    """Homogeneous speckle medium with a centered hypoechoic disk.

    ``attenuation`` scales the echogenicity inside the disk of radius
    ``cyst_radius_fraction * n``; 0 makes the cyst anechoic.
    """
    n = int(n)
    if not 0 <= cyst_radius_fraction < 0.5:
        raise ValueError("cyst radius fraction must lie in [0, 0.5)")
    if not 0 <= attenuation <= 1:
        raise ValueError("attenuation must lie in [0, 1]")
    c = (n - 1) / 2.0
    rr, cc = np.mgrid[0:n, 0:n]
    inside = (rr - c) ** 2 + (cc - c) ** 2 <= (cyst_radius_fraction * n) ** 2
    base = np.where(inside, attenuation, 1.0)
    return speckle_trf(base, scatterer_density, GgdParams(ggd_shape, 1.0, seed))


def gaussian_psf(n_kernel=15, variance_px=5.0):
    """Isotropic Gaussian kernel with unit sum and per-axis variance ``variance_px``."""
    if not variance_px > 0:
        raise ValueError("variance must be positive")
    n_kernel = int(n_kernel)
    r = np.arange(n_kernel) - n_kernel // 2
    g = np.exp(-(r**2) / (2.0 * variance_px))
    k = np.outer(g, g)
    return k / k.sum()


def gabor_psf(axial_freq_cycles_per_sample=0.175, axial_sigma_px=3.0,
              lateral_sigma_px=1.5, n_kernel=21):
    """Separable ultrasound-like pulse: axial rows carry a modulated Gaussian.

    The axial profile has its mean removed (a band-pass pulse with no DC
    response) and the kernel is scaled to unit l2 norm. The 0.175 default
    is a 3.5 MHz pulse sampled at 20 MHz.
    """
    f = axial_freq_cycles_per_sample
    if not 0 < f < 0.5:
        raise ValueError("axial frequency must lie in (0, 0.5) cycles/sample")
    n_kernel = int(n_kernel)
    r = np.arange(n_kernel) - n_kernel // 2
    env = np.exp(-(r**2) / (2.0 * axial_sigma_px**2))
    axial = env * np.cos(2.0 * np.pi * f * r)
    axial -= env * (axial.sum() / env.sum())
    lateral = np.exp(-(r**2) / (2.0 * lateral_sigma_px**2))
    k = np.outer(axial, lateral)
    return k / np.linalg.norm(k)


@dataclass(frozen=True)
class AcquisitionSpec:
    cs_ratio: float
    snr_db: float | None = 40.0
    sensing_seed: int = 0
    noise_seed: int = 1

    def __post_init__(self):
        if not 0 < self.cs_ratio <= 1:
            raise ValueError(f"cs_ratio must lie in (0, 1], got {self.cs_ratio}")


@dataclass
class Acquisition:
    y: np.ndarray
    sensing: SensingOperator
    clean: np.ndarray
    realized_snr_db: float | None


def measurement_count(cs_ratio, n):
    """``M = round(cs_ratio * N)``, at least 1 (half-up rounding)."""
    return max(1, int(np.floor(cs_ratio * n + 0.5)))


def acquire(trf, psf, spec):
    """Simulate ``y = Phi H x + noise``.

    The noise variance is set from the clean measurement energy so that the
    requested SNR (in dB) holds in expectation.
    """
    trf = as_image(trf, "trf")
    if not isinstance(psf, PsfOperator):
        psf = PsfOperator(psf, trf.shape)
    blurred = psf.apply(trf)
    m = measurement_count(spec.cs_ratio, trf.size)
    sensing = SensingOperator(trf.shape, m, spec.sensing_seed)
    clean = sensing.apply(blurred)
    if spec.snr_db is None:
        return Acquisition(clean, sensing, clean, None)
    sigma2 = np.sum(clean**2) / (m * 10.0 ** (spec.snr_db / 10.0))
    noise = _rng(spec.noise_seed).normal(0.0, np.sqrt(sigma2), m)
    realized = 10.0 * np.log10(np.sum(clean**2) / np.sum(noise**2))
    return Acquisition(clean + noise, sensing, clean, float(realized))
