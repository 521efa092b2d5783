"""Image validation and the circular-convolution blur operator.

Images are plain 2D ``float64`` numpy arrays. The blur ``H`` is a 2D
circular convolution, i.e. a block circulant matrix with circulant blocks,
and is applied through the real 2D FFT.
"""

import numpy as np
import scipy.fft as sfft

from .errors import SingularityError, SizeError

__all__ = [
    "as_image",
    "embed_kernel",
    "PsfOperator",
    "convolve_circular",
    "convolve_adjoint",
    "spectral_solve_tikhonov",
]


def as_image(x, name="image"):
    """Return ``x`` as a finite 2D float64 array, raising on bad input."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def embed_kernel(kernel, shape):
    """Zero-pad ``kernel`` to ``shape`` with its center moved to index (0, 0).

    The center of a kernel of size ``(kh, kw)`` is ``(kh // 2, kw // 2)``,
    so an odd-sized centered impulse embeds to the identity.
    """
    kernel = as_image(kernel, "kernel")
    kh, kw = kernel.shape
    height, width = shape
    if kh > height or kw > width:
        raise SizeError(
            f"kernel {kernel.shape} is larger than the target grid {tuple(shape)}"
        )
    padded = np.zeros((height, width))
    padded[:kh, :kw] = kernel
    return np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))


class PsfOperator:
    """Spatially invariant blur with periodic boundaries.

    Parameters
    ----------
    kernel : array_like
        2D point spread function. Its center pixel is ``(kh // 2, kw // 2)``.
    shape : tuple of int
        Grid size ``(height, width)`` the operator acts on.

    Attributes
    ----------
    spectrum : ndarray
        ``rfft2`` of the embedded kernel, shape ``(height, width // 2 + 1)``.
    lipschitz : float
        ``max |h_hat|^2``, the largest eigenvalue of ``H^T H``.
    """

    def __init__(self, kernel, shape):
        self.kernel = as_image(kernel, "kernel").copy()
        self.shape = (int(shape[0]), int(shape[1]))
        self.spectrum = sfft.rfft2(embed_kernel(self.kernel, self.shape))
        self.power = np.abs(self.spectrum) ** 2
        self.lipschitz = float(self.power.max())
        self.kernel.setflags(write=False)
        self.spectrum.setflags(write=False)
        self.power.setflags(write=False)

    @property
    def target_height(self):
        return self.shape[0]

    @property
    def target_width(self):
        return self.shape[1]

    def _check(self, x, name):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise SizeError(f"{name} has shape {x.shape}, operator expects {self.shape}")
        return x

    def _filter(self, x, transfer):
        return sfft.irfft2(sfft.rfft2(x) * transfer, s=self.shape)

    def apply(self, x):
        return self._filter(self._check(x, "x"), self.spectrum)

    def adjoint(self, y):
        return self._filter(self._check(y, "y"), np.conj(self.spectrum))

    def normal(self, x):
        """Apply ``H^T H``."""
        return self._filter(self._check(x, "x"), self.power)

    __call__ = apply


def convolve_circular(op, x):
    """Return ``H x`` for the circular blur ``op``."""
    return op.apply(x)


def convolve_adjoint(op, y):
    """Return ``H^T y`` (correlation with the kernel)."""
    return op.adjoint(y)


def spectral_solve_tikhonov(op, rhs, beta, alpha):
    """Solve ``(beta H^T H + 2 alpha I) x = rhs`` exactly in the Fourier domain.

    Raises
    ------
    SingularityError
        If ``beta |h_hat|^2 + 2 alpha`` vanishes at some frequency.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    rhs = op._check(rhs, "rhs")
    denom = beta * op.power + 2.0 * alpha
    if np.any(denom <= 0.0):
        raise SingularityError(
            "beta*|h_hat|^2 + 2*alpha vanishes at some frequency; increase alpha"
        )
    return sfft.irfft2(sfft.rfft2(rhs) / denom, s=op.shape)
