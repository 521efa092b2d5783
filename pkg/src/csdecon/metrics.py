"""Image quality metrics: PSNR, global SSIM and CNR."""

from dataclasses import dataclass

import numpy as np

from .errors import SizeError

__all__ = ["RegionSpec", "psnr", "ssim_global", "cnr"]


def _pair(x_true, x_hat):
    x = np.asarray(x_true, dtype=np.float64)
    y = np.asarray(x_hat, dtype=np.float64)
    if x.shape != y.shape:
        raise SizeError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def psnr(x_true, x_hat):
    """``10 log10(N L^2 / ||x - x_hat||^2)`` with ``L = max(x_true)``.

    Returns ``inf`` for identical images.
    """
    x, y = _pair(x_true, x_hat)
    peak = x.max()
    if peak == 0:
        raise ValueError("PSNR is undefined when the reference maximum is zero")
    err = np.sum((x - y) ** 2)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(x.size * peak**2 / err))


def ssim_global(x_true, x_hat, k1=0.01, k2=0.03, dynamic_range=1.0):
    """Single SSIM statistic over the whole image (no sliding window).

    Uses population means, variances and covariance, with
    ``c1 = (k1 L)^2`` and ``c2 = (k2 L)^2``.
    """
    x, y = _pair(x_true, x_hat)
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cov = np.mean((x - mx) * (y - my))
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx**2 + my**2 + c1) * (vx + vy + c2)
    return float(num / den)


@dataclass(frozen=True)
class RegionSpec:
    """Pixel rectangle ``[row0, row0 + height) x [col0, col0 + width)``."""

    row0: int
    col0: int
    height: int
    width: int

    def check(self, shape):
        if min(self.row0, self.col0) < 0 or self.height * self.width < 2:
            raise ValueError(f"invalid region {self}")
        if self.row0 + self.height > shape[0] or self.col0 + self.width > shape[1]:
            raise ValueError(f"region {self} exceeds image bounds {shape}")

    def extract(self, img):
        self.check(img.shape)
        return img[self.row0:self.row0 + self.height, self.col0:self.col0 + self.width]

    def overlaps(self, other):
        return not (
            self.row0 + self.height <= other.row0
            or other.row0 + other.height <= self.row0
            or self.col0 + self.width <= other.col0
            or other.col0 + other.width <= self.col0
        )


def cnr(img, r1, r2, envelope=True):
    """Contrast-to-noise ratio ``|m1 - m2| / sqrt(s1^2 + s2^2)``.

    With ``envelope=True`` the statistic is computed on ``|img|`` scaled to
    a maximum of 1; otherwise on the raw values.
    """
    img = np.asarray(img, dtype=np.float64)
    if r1.overlaps(r2):
        raise ValueError("CNR regions must be disjoint")
    if envelope:
        img = np.abs(img)
        peak = img.max()
        if peak > 0:
            img = img / peak
    a, b = r1.extract(img), r2.extract(img)
    den = np.sqrt(a.var() + b.var())
    if den == 0:
        raise ValueError("CNR is undefined: both regions are constant")
    return float(abs(a.mean() - b.mean()) / den)
