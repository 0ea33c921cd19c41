"""Real spherical harmonics on sampled points, least-squares SHT, PSD,
z-axis rotations and Gaussian random fields.

Real harmonics are orthonormal on the unit sphere and carry no
Condon-Shortley phase::

    Y_l0  = P_l0(cos t)
    Y_lm  = sqrt(2) P_lm(cos t) cos(m p)     m > 0
    Y_l-m = sqrt(2) P_lm(cos t) sin(m p)     m > 0

with ``P_lm`` the fully normalized associated Legendre functions.  The
complex harmonics follow as ``Y_l^m = (-1)^m (Y_lm + i Y_l-m) / sqrt(2)``
for ``m > 0`` once the phase is restored.  Coefficient vectors ("alm") are
flat arrays indexed by ``l*l + l + m``.

The same :class:`HarmonicBasis` also represents the Fourier basis of the
circle (degree ``k``: ``cos k t`` at order ``k``, ``sin k t`` at ``-k``), so
PSD, rotation and alignment code is shared between the two manifolds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import NumericalRankError, ShapeError
from .sampling import RingSampling

__all__ = [
    "HarmonicBasis",
    "alm_index",
    "n_alm",
    "legendre_normalized",
    "real_harmonics",
    "eval_harmonics",
    "circle_harmonics",
    "sht_analysis",
    "sht_synthesis",
    "psd",
    "rotate_z",
    "synthesize_grf",
    "read_spectrum_csv",
    "write_spectrum_csv",
]

RANK_RCOND = 1e-10


def n_alm(ell_max):
    return (ell_max + 1) ** 2


def alm_index(ell, m):
    return ell * ell + ell + m


def legendre_normalized(ell_max, x):
    """Fully normalized ``P_lm(x)`` for ``0 <= m <= l <= ell_max``.

    Returns an array of shape ``(ell_max + 1, ell_max + 1, len(x))`` indexed
    ``[l, m]``; entries with ``m > l`` are zero.  Uses the standard stable
    three-term recurrence in ``l`` at fixed ``m``.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((ell_max + 1, ell_max + 1) + x.shape)
    pmm = np.full(x.shape, 1.0 / np.sqrt(4 * np.pi))
    for m in range(ell_max + 1):
        if m > 0:
            pmm = pmm * np.sqrt((2 * m + 1) / (2 * m)) * s
        out[m, m] = pmm
        if m == ell_max:
            break
        out[m + 1, m] = np.sqrt(2 * m + 3) * x * pmm
        for ell in range(m + 2, ell_max + 1):
            a = np.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
            b = np.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
            out[ell, m] = a * (x * out[ell - 1, m] - b * out[ell - 2, m])
    return out


def real_harmonics(theta, phi, ell_max):
    """Matrix of real harmonics, shape ``(n_points, (ell_max+1)^2)``."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    phi = np.asarray(phi, dtype=np.float64).ravel()
    p = legendre_normalized(ell_max, np.cos(theta))
    y = np.empty((theta.size, n_alm(ell_max)))
    r2 = np.sqrt(2.0)
    for ell in range(ell_max + 1):
        y[:, alm_index(ell, 0)] = p[ell, 0]
        for m in range(1, ell + 1):
            y[:, alm_index(ell, m)] = r2 * p[ell, m] * np.cos(m * phi)
            y[:, alm_index(ell, -m)] = r2 * p[ell, m] * np.sin(m * phi)
    return y


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Sampled harmonics ``Y`` with a QR factorization for least squares.

    ``degrees[j]`` and ``orders[j]`` give the ``(l, m)`` of column ``j``.
    """

    Y: np.ndarray
    degrees: np.ndarray
    orders: np.ndarray
    ell_max: int
    weight: float = 1.0
    _qr: tuple = field(init=False, repr=False)

    def __post_init__(self):
        n, c = self.Y.shape
        if c > n:
            raise ValueError(f"{c} harmonics cannot be fit from {n} samples")
        q, r = np.linalg.qr(self.Y)
        diag = np.abs(np.diag(r))
        if diag.min() <= RANK_RCOND * diag.max():
            raise NumericalRankError("sampled harmonics are numerically rank deficient")
        object.__setattr__(self, "_qr", (q, r))

    @property
    def n_pix(self):
        return self.Y.shape[0]

    @property
    def n_coeffs(self):
        return self.Y.shape[1]

    @cached_property
    def condition_number(self):
        sv = np.linalg.svd(self.Y, compute_uv=False)
        return float(sv[0] / sv[-1])

    def gram_deviation(self):
        """Max entry of ``|w Y^T Y - I|``, ``w`` the quadrature weight."""
        g = self.weight * (self.Y.T @ self.Y)
        return float(np.abs(g - np.eye(self.n_coeffs)).max())


def eval_harmonics(sampling, ell_max):
    """Real harmonics up to ``ell_max`` on a sphere sampling (or a ring).

    Raises ``ValueError`` when ``(ell_max+1)^2`` exceeds the number of samples.
    """
    if isinstance(sampling, RingSampling):
        return circle_harmonics(sampling, ell_max)
    if ell_max < 0 or n_alm(ell_max) > sampling.n_pix:
        raise ValueError(f"ell_max={ell_max} needs {n_alm(ell_max)} samples, "
                         f"sampling has {sampling.n_pix}")
    ell = np.repeat(np.arange(ell_max + 1), 2 * np.arange(ell_max + 1) + 1)
    m = np.concatenate([np.arange(-l, l + 1) for l in range(ell_max + 1)])
    y = real_harmonics(sampling.theta, sampling.phi, ell_max)
    area = 4 * np.pi * getattr(sampling, "area_fraction", 1.0)
    return HarmonicBasis(y, ell, m, ell_max, area / sampling.n_pix)


def circle_harmonics(ring, k_max=None):
    """Fourier basis ``1, cos k t, sin k t`` sampled on a regular ring."""
    n = ring.n
    if k_max is None:
        k_max = n // 2
    if not 0 <= k_max <= n // 2:
        raise ValueError(f"k_max must lie in [0, {n // 2}]")
    t = ring.angles
    cols, deg, order = [np.full(n, 1 / np.sqrt(2 * np.pi))], [0], [0]
    for k in range(1, k_max + 1):
        cols.append(np.cos(k * t) / np.sqrt(np.pi))
        deg.append(k)
        order.append(k)
        if 2 * k != n:
            cols.append(np.sin(k * t) / np.sqrt(np.pi))
            deg.append(k)
            order.append(-k)
    return HarmonicBasis(np.stack(cols, 1), np.array(deg), np.array(order), k_max,
                         2 * np.pi / n)


def sht_analysis(b, x):
    """Least-squares coefficients ``a = Y^+ x`` (``x`` of shape (n,) or (n, k))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != b.n_pix:
        raise ShapeError(f"map has {x.shape[0]} pixels, basis has {b.n_pix}")
    q, r = b._qr
    return solve_triangular(r, q.T @ x)


def sht_synthesis(b, a):
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] != b.n_coeffs:
        raise ShapeError(f"got {a.shape[0]} coefficients, basis has {b.n_coeffs}")
    return b.Y @ a


def _degrees_for(a, degrees):
    if degrees is not None:
        return np.asarray(degrees)
    ell_max = int(round(np.sqrt(a.shape[0]))) - 1
    if n_alm(ell_max) != a.shape[0]:
        raise ShapeError(f"{a.shape[0]} is not a valid alm length")
    return np.repeat(np.arange(ell_max + 1), 2 * np.arange(ell_max + 1) + 1)


def psd(a, degrees=None):
    """Per-degree power ``C_l = mean_m a_lm^2``.

    ``a`` may carry trailing batch axes.  ``degrees`` maps coefficients to
    degrees (defaults to the sphere layout); pass ``basis.degrees`` for the
    circle.
    """
    a = np.asarray(a, dtype=np.float64)
    deg = _degrees_for(a, degrees)
    counts = np.bincount(deg)
    sq = a * a
    out = np.zeros((counts.size,) + a.shape[1:])
    np.add.at(out, deg, sq)
    return out / counts.reshape((-1,) + (1,) * (a.ndim - 1))


def _sphere_layout(size):
    deg = _degrees_for(np.empty(size), None)
    return deg, np.arange(size) - (deg * deg + deg)


def rotate_z(a, angle, degrees=None, orders=None):
    """Rotate the field by ``angle`` about the z axis: ``f'(t, p) = f(t, p - angle)``.

    Each pair ``(l, m)`` / ``(l, -m)`` is mixed by the 2x2 rotation through
    ``m * angle``.  ``degrees``/``orders`` default to the sphere layout; pass a
    basis' arrays for the circle.
    """
    a = np.asarray(a, dtype=np.float64)
    if orders is None:
        degrees, orders = _sphere_layout(a.shape[0])
    lut = {(int(l), int(m)): j for j, (l, m) in enumerate(zip(degrees, orders))}
    pos = [j for j, m in enumerate(orders) if m > 0 and (int(degrees[j]), -int(m)) in lut]
    neg = [lut[(int(degrees[j]), -int(orders[j]))] for j in pos]
    shape = (-1,) + (1,) * (a.ndim - 1)
    mphi = np.asarray(orders)[pos] * angle
    c, s = np.cos(mphi).reshape(shape), np.sin(mphi).reshape(shape)
    out = a.copy()
    out[pos] = c * a[pos] - s * a[neg]
    out[neg] = s * a[pos] + c * a[neg]
    return out


def synthesize_grf(b, cl, seed):
    """Gaussian random field with ``a_lm ~ N(0, C_l)`` synthesized on ``b``."""
    cl = np.asarray(cl, dtype=np.float64)
    if cl.ndim != 1 or cl.size < b.ell_max + 1:
        raise ValueError(f"spectrum needs {b.ell_max + 1} entries, got {cl.size}")
    if np.any(cl < 0) or not np.all(np.isfinite(cl)):
        raise ValueError("spectrum must be finite and nonnegative")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(b.n_coeffs) * np.sqrt(cl[b.degrees])
    return sht_synthesis(b, a)


def read_spectrum_csv(path):
    """Read an ``ell,C`` CSV into a dense array indexed by ``ell``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"ell", "C"}:
        raise ValueError(f"{path}: expected columns 'ell,C'")
    ell = np.array([int(r["ell"]) for r in rows])
    c = np.array([float(r["C"]) for r in rows])
    if not np.array_equal(ell, np.arange(len(ell))):
        raise ValueError(f"{path}: ell must run 0, 1, 2, ... without gaps")
    return c


def write_spectrum_csv(cl, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ell", "C"])
        for ell, c in enumerate(cl):
            w.writerow([ell, f"{c:.17g}"])
