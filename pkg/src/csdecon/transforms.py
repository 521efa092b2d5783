"""Sparsifying basis, compressive sensing operator and finite differences.

* :class:`HaarWavelet` is the orthonormal multi-level 2D Haar transform.
  Coefficients are stored in the usual in-place pyramid layout
  (approximation block in the top-left corner) and flattened row-major.
* :class:`SensingOperator` is a structurally random matrix
  ``Phi = R_m T D_s``: random sign flips, an orthonormal 2D DCT and a random
  subset of ``m`` rows. Its rows are orthonormal, so ``Phi Phi^T = I_m``.
* :class:`DiffOperator` holds the periodic first and second order
  differences used by the generalized total variation prior.

Random draws use ``numpy.random.Generator(PCG64(seed))``.
"""

import numpy as np
import scipy.fft as sfft

from .errors import SizeError

__all__ = [
    "HaarWavelet",
    "dwt2_forward",
    "dwt2_inverse",
    "SensingOperator",
    "srm_new",
    "srm_apply",
    "srm_adjoint",
    "DiffOperator",
    "DIFF_DIRECTIONS",
    "diff_operators",
    "diff_apply",
    "diff_adjoint",
]

_SQRT2 = np.sqrt(2.0)


class HaarWavelet:
    """Orthonormal multi-level 2D Haar transform on a fixed grid."""

    def __init__(self, shape, levels=3):
        height, width = int(shape[0]), int(shape[1])
        levels = int(levels)
        if levels < 1:
            raise ValueError("levels must be >= 1")
        block = 2 ** levels
        if height % block or width % block:
            raise SizeError(
                f"image size {height}x{width} is not divisible by 2**levels = {block}"
            )
        self.shape = (height, width)
        self.levels = levels
        self.size = height * width

    def forward(self, x):
        """Analysis: image -> flat coefficient vector of length ``N``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise SizeError(f"image shape {x.shape} does not match {self.shape}")
        c = x.copy()
        h, w = self.shape
        for _ in range(self.levels):
            blk = c[:h, :w]
            lo = (blk[0::2] + blk[1::2]) / _SQRT2
            hi = (blk[0::2] - blk[1::2]) / _SQRT2
            blk = np.concatenate([lo, hi], axis=0)
            lo = (blk[:, 0::2] + blk[:, 1::2]) / _SQRT2
            hi = (blk[:, 0::2] - blk[:, 1::2]) / _SQRT2
            c[:h, :w] = np.concatenate([lo, hi], axis=1)
            h //= 2
            w //= 2
        return c.ravel()

    def inverse(self, a):
        """Synthesis ``Psi a``; also the adjoint of :meth:`forward`."""
        a = np.asarray(a, dtype=np.float64)
        if a.size != self.size:
            raise SizeError(f"coefficient vector has length {a.size}, expected {self.size}")
        c = a.reshape(self.shape).copy()
        h = self.shape[0] >> (self.levels - 1)
        w = self.shape[1] >> (self.levels - 1)
        for _ in range(self.levels):
            blk = c[:h, :w]
            lo, hi = blk[:, : w // 2], blk[:, w // 2 :]
            out = np.empty_like(blk)
            out[:, 0::2] = (lo + hi) / _SQRT2
            out[:, 1::2] = (lo - hi) / _SQRT2
            lo, hi = out[: h // 2], out[h // 2 :]
            blk = np.empty_like(out)
            blk[0::2] = (lo + hi) / _SQRT2
            blk[1::2] = (lo - hi) / _SQRT2
            c[:h, :w] = blk
            h *= 2
            w *= 2
        return c

    adjoint = inverse


def dwt2_forward(op, x):
    return op.forward(x)


def dwt2_inverse(op, a):
    return op.inverse(a)


class SensingOperator:
    """Structurally random matrix with orthonormal rows.

    Parameters
    ----------
    shape : tuple of int
        Native shape of the signal. The orthonormal DCT is applied over all
        axes of this shape, so 1D and 2D signals are both supported.
    m : int
        Number of measurements, ``1 <= m <= N``.
    seed : int
        Unsigned 64-bit seed for the sign flips and the row subset.
    """

    def __init__(self, shape, m, seed):
        self.shape = tuple(int(s) for s in np.atleast_1d(shape))
        self.n = int(np.prod(self.shape))
        self.m = int(m)
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        self.seed = int(seed)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        rng = np.random.Generator(np.random.PCG64(self.seed))
        self.sign_flips = rng.choice(np.array([-1.0, 1.0]), size=self.n)
        self.row_subset = np.sort(rng.choice(self.n, size=self.m, replace=False))
        self.sign_flips.setflags(write=False)
        self.row_subset.setflags(write=False)

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.size != self.n:
            raise SizeError(f"input has {x.size} entries, operator expects {self.n}")
        t = sfft.dctn((x.ravel() * self.sign_flips).reshape(self.shape), norm="ortho")
        return t.ravel()[self.row_subset]

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != self.m:
            raise SizeError(f"measurement vector has {y.size} entries, expected {self.m}")
        full = np.zeros(self.n)
        full[self.row_subset] = y
        t = sfft.idctn(full.reshape(self.shape), norm="ortho").ravel()
        return t * self.sign_flips


def srm_new(n, m, seed, shape=None):
    """Build a :class:`SensingOperator` for signals of ``n`` entries.

    ``shape`` defaults to ``(n,)``; pass the image shape to use a 2D DCT.
    """
    if shape is None:
        shape = (n,)
    if int(np.prod(shape)) != n:
        raise SizeError(f"shape {shape} does not hold {n} entries")
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    return SensingOperator(shape, m, seed)


def srm_apply(op, x):
    return op.apply(x)


def srm_adjoint(op, y):
    return op.adjoint(y)


DIFF_DIRECTIONS = ("h", "v", "hh", "vv", "hv")


def _first(x, axis):
    # x_i - x_{i-1}, periodic
    out = np.empty_like(x)
    if axis == 0:
        np.subtract(x[1:], x[:-1], out=out[1:])
        np.subtract(x[0], x[-1], out=out[0])
    else:
        np.subtract(x[:, 1:], x[:, :-1], out=out[:, 1:])
        np.subtract(x[:, 0], x[:, -1], out=out[:, 0])
    return out


def _first_t(x, axis):
    # x_i - x_{i+1}, periodic
    out = np.empty_like(x)
    if axis == 0:
        np.subtract(x[:-1], x[1:], out=out[:-1])
        np.subtract(x[-1], x[0], out=out[-1])
    else:
        np.subtract(x[:, :-1], x[:, 1:], out=out[:, :-1])
        np.subtract(x[:, -1], x[:, 0], out=out[:, -1])
    return out


class DiffOperator:
    """Periodic finite difference ``Delta^d`` for ``d`` in h, v, hh, vv, hv.

    ``h`` is ``u_i - u_left(i)`` (axis 1) and ``v`` is ``u_i - u_above(i)``
    (axis 0); second order operators are compositions of these.
    """

    _AXES = {"h": (1,), "v": (0,), "hh": (1, 1), "vv": (0, 0), "hv": (1, 0)}

    def __init__(self, direction):
        if direction not in self._AXES:
            raise ValueError(f"unknown difference direction {direction!r}")
        self.direction = direction
        self.axes = self._AXES[direction]
        self.order = len(self.axes)

    @property
    def weight(self):
        """The generalized-TV weight ``2 ** (1 - order)``."""
        return 2.0 ** (1 - self.order)

    def apply(self, x):
        out = np.asarray(x, dtype=np.float64)
        for ax in self.axes:
            out = _first(out, ax)
        return out

    def adjoint(self, x):
        out = np.asarray(x, dtype=np.float64)
        for ax in reversed(self.axes):
            out = _first_t(out, ax)
        return out

    def __repr__(self):
        return f"DiffOperator({self.direction!r})"


def diff_operators():
    """All five generalized-TV difference operators."""
    return [DiffOperator(d) for d in DIFF_DIRECTIONS]


def diff_apply(d, x):
    return d.apply(x)


def diff_adjoint(d, x):
    return d.adjoint(x)
