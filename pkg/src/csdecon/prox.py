"""Proximal operators of ``K|x|`` and ``K|x|^p`` for ``1 <= p <= 2``.

For ``p > 1`` the prox is ``sign(x0) * q`` where ``q >= 0`` is the root of
``q + p K q^(p-1) = |x0|``. The root function is increasing on
``[0, |x0|]``, so a Newton iteration safeguarded by bisection on that
bracket always converges.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

__all__ = ["ProxParams", "prox_l1", "prox_lp_scalar", "prox_lp"]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class ProxParams:
    K: float
    p: float
    newton_tol: float = NEWTON_TOL
    newton_max_iter: int = NEWTON_MAX_ITER

    def __post_init__(self):
        _check(self.K, self.p)


def _check(K, p):
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")


def prox_l1(v, K):
    """Soft thresholding ``sign(v) * max(|v| - K, 0)``."""
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - K, 0.0)


def _root_lp(b, K, p, tol, max_iter):
    """Vectorized root of ``q + p K q^(p-1) = b`` for ``b >= 0`` and ``1 < p < 2``."""
    c = p * K
    # both b and (b / c)^(1 / (p - 1)) make the root function non-negative
    with np.errstate(over="ignore"):
        hi = np.minimum(b, (b / c) ** (1.0 / (p - 1.0)))
    lo = np.zeros_like(b)
    q = hi.copy()
    active = b > 0
    scale = np.maximum(b, 1.0)
    for _ in range(max_iter):
        if not active.any():
            return q
        qa, la, ha, ba = q[active], lo[active], hi[active], b[active]
        f = qa + c * qa ** (p - 1.0) - ba
        pos = f > 0
        ha = np.where(pos, qa, ha)
        la = np.where(pos, la, qa)
        with np.errstate(divide="ignore", invalid="ignore"):
            fp = 1.0 + c * (p - 1.0) * qa ** (p - 2.0)
            qn = qa - f / fp
        bad = ~np.isfinite(qn) | (qn < la) | (qn > ha)
        qn = np.where(bad, 0.5 * (la + ha), qn)
        at_root = np.abs(f) <= tol * scale[active]
        qn = np.where(at_root, qa, qn)
        done = at_root | (np.abs(qn - qa) <= tol * qn)
        q[active], lo[active], hi[active] = qn, la, ha
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if active.any():
        raise NumericalError(
            f"Newton iteration for prox_lp did not converge in {max_iter} iterations",
            step="prox_lp",
            iterations=max_iter,
            last=q,
        )
    return q


def prox_lp(v, K, p, newton_tol=NEWTON_TOL, newton_max_iter=NEWTON_MAX_ITER):
    """Elementwise prox of ``K |x|^p``.

    ``p == 1`` uses the closed-form soft threshold and ``p == 2`` the
    closed form ``x0 / (1 + 2K)``; other values run safeguarded Newton.

    Raises
    ------
    NumericalError
        If some element has not converged after ``newton_max_iter`` steps.
    """
    _check(K, p)
    v = np.asarray(v, dtype=np.float64)
    if p == 1.0:
        return prox_l1(v, K)
    if p == 2.0:
        return v / (1.0 + 2.0 * K)
    b = np.abs(v).ravel()
    q = _root_lp(b, K, p, newton_tol, newton_max_iter)
    return np.sign(v) * q.reshape(v.shape)


def prox_lp_scalar(x0, K, p, newton_tol=NEWTON_TOL, newton_max_iter=NEWTON_MAX_ITER):
    """Scalar version of :func:`prox_lp`."""
    return float(prox_lp(np.array([float(x0)]), K, p, newton_tol, newton_max_iter)[0])
