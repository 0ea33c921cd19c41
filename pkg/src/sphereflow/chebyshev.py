"""Chebyshev graph convolution in the vertex domain, with gradients.

A filter bank holds coefficients ``theta[k, f_in, f_out]`` and maps a signal
``X`` of shape ``(n, F_in)`` to::

    Y[:, g] = sum_f sum_k theta[k, f, g] T_k(L~) X[:, f]

where ``L~ = (2 / lambda_max) L - I`` and ``T_k`` follows the three-term
recurrence.  Each application costs ``K - 1`` sparse products with the
``(n, F_in)`` block, i.e. ``O(K |E| F_in)``, plus a dense recombination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as npcheb

from .exceptions import ShapeError

__all__ = [
    "ChebFilterBank",
    "ScaledLaplacian",
    "scale_laplacian",
    "cheb_basis",
    "cheb_apply",
    "cheb_grad",
    "cheb_fit",
    "cheb_response",
    "init_bank",
]


@dataclass(eq=False)
class ChebFilterBank:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim == 1:
            self.theta = self.theta[:, None, None]
        if self.theta.ndim != 3 or self.theta.shape[0] < 1:
            raise ShapeError("theta must have shape (K, F_in, F_out) with K >= 1")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("filter coefficients must be finite")

    @property
    def K(self):
        return self.theta.shape[0]

    @property
    def F_in(self):
        return self.theta.shape[1]

    @property
    def F_out(self):
        return self.theta.shape[2]


def init_bank(K, F_in, F_out, rng):
    """Coefficients drawn i.i.d. from ``N(0, 1 / (K F_in))``."""
    return ChebFilterBank(rng.normal(0.0, np.sqrt(1.0 / (K * F_in)), size=(K, F_in, F_out)))


class ScaledLaplacian:
    """Implicit operator ``x -> scale * (L x) - x``.

    ``scale`` is ``2 / lambda_max``; it may be a per-row vector when several
    graphs are stacked block-diagonally.
    """

    def __init__(self, laplacian, scale):
        self.laplacian = sp.csr_matrix(laplacian)
        scale = np.asarray(scale, dtype=np.float64)
        self.scale = scale if scale.ndim == 0 else scale[:, None]

    @property
    def n(self):
        return self.laplacian.shape[0]

    def __matmul__(self, x):
        lx = self.laplacian @ x
        s = self.scale if x.ndim == 2 or self.scale.ndim == 0 else self.scale[:, 0]
        return s * lx - x

    def toarray(self):
        s = self.scale if self.scale.ndim == 0 else self.scale[:, 0][:, None]
        return s * self.laplacian.toarray() - np.eye(self.n)

    @classmethod
    def block_diag(cls, ops):
        lap = sp.block_diag([o.laplacian for o in ops], format="csr")
        scale = np.concatenate([np.broadcast_to(np.ravel(o.scale), (o.n,)) for o in ops])
        return cls(lap, scale)


def scale_laplacian(g, lambda_max=None):
    """Operator with spectrum in ``[-1, 1]`` built from ``g.lambda_max``."""
    lam = g.lambda_max if lambda_max is None else lambda_max
    if lam <= 0:
        # edgeless graph: L = 0, any positive scale works
        lam = 2.0
    return ScaledLaplacian(g.laplacian, 2.0 / lam)


def _as_operator(op):
    if isinstance(op, ScaledLaplacian):
        return op
    return scale_laplacian(op)


def cheb_basis(op, x, K):
    """Stack ``[T_0(L~) x, ..., T_{K-1}(L~) x]``, shape ``(K,) + x.shape``."""
    op = _as_operator(op)
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((K,) + x.shape)
    out[0] = x
    if K > 1:
        out[1] = op @ x
    for k in range(2, K):
        out[k] = 2.0 * (op @ out[k - 1]) - out[k - 2]
    return out


def _prep(bank, op, x):
    op = _as_operator(op)
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != op.n:
        raise ShapeError(f"signal of shape {x.shape} does not fit a graph with {op.n} vertices")
    if x.shape[1] != bank.F_in:
        raise ShapeError(f"signal has {x.shape[1]} channels, bank expects {bank.F_in}")
    return op, x, squeeze


def cheb_apply(bank, op, x, basis=None):
    """Filter ``x`` (``(n,)`` or ``(n, F_in)``) with every filter of the bank.

    ``op`` is a graph or a :class:`ScaledLaplacian`.  A precomputed
    ``basis`` from :func:`cheb_basis` skips the recurrence.
    """
    op, x, squeeze = _prep(bank, op, x)
    if basis is None:
        basis = cheb_basis(op, x, bank.K)
    n = x.shape[0]
    flat = np.transpose(basis, (1, 0, 2)).reshape(n, bank.K * bank.F_in)
    y = flat @ bank.theta.reshape(bank.K * bank.F_in, bank.F_out)
    return y[:, 0] if squeeze and bank.F_out == 1 else y


def cheb_grad(bank, op, x, dy, basis=None):
    """Gradients ``(d theta, d x)`` of ``<cheb_apply(bank, op, x), dy>``.

    The scaled Laplacian is symmetric, so ``d x = sum_k T_k(L~) dy theta_k^T``
    is evaluated with a Clenshaw recurrence (``K - 1`` sparse products).
    """
    op, x, squeeze = _prep(bank, op, x)
    dy = np.asarray(dy, dtype=np.float64)
    if dy.ndim == 1:
        dy = dy[:, None]
    if dy.shape != (x.shape[0], bank.F_out):
        raise ShapeError(f"dy has shape {dy.shape}, expected {(x.shape[0], bank.F_out)}")
    if basis is None:
        basis = cheb_basis(op, x, bank.K)
    dtheta = np.einsum("knf,ng->kfg", basis, dy)

    z = np.einsum("ng,kfg->knf", dy, bank.theta)
    K = bank.K
    if K == 1:
        dx = z[0]
    else:
        b1 = np.zeros_like(dy, shape=z.shape[1:])
        b2 = np.zeros_like(b1)
        for k in range(K - 1, 0, -1):
            b1, b2 = z[k] + 2.0 * (op @ b1) - b2, b1
        dx = z[0] + (op @ b1) - b2
    return dtheta, (dx[:, 0] if squeeze else dx)


def cheb_fit(h, K, lambda_max):
    """Coefficients of a degree ``K-1`` Chebyshev interpolant of ``h`` on
    ``[0, lambda_max]``, in the scaled variable."""
    return npcheb.chebinterpolate(lambda t: h((t + 1.0) * lambda_max / 2.0), K - 1)


def cheb_response(theta, lam, lambda_max):
    """Frequency response ``sum_k theta_k T_k(2 lam / lambda_max - 1)``."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    return npcheb.chebval(2.0 * np.asarray(lam) / lambda_max - 1.0, theta)
