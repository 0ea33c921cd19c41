"""HEALPix pixelization, order-o patches and the regular circle sampling.

All index arithmetic follows the analytic HEALPix layout: 12 base faces,
iso-latitude rings, polar caps with ``z = 1 - i^2 / (3 n_side^2)`` and an
equatorial belt with ``z = 4/3 - 2 i / (3 n_side)``.  Face-local coordinates
``(ix, iy)`` put the south corner of a face at ``(0, 0)``, the east corner at
``(n_side-1, 0)``, the west corner at ``(0, n_side-1)`` and the north corner
at ``(n_side-1, n_side-1)``.

Functions taking pixel indices are vectorized over numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import OrderingError

__all__ = [
    "MAX_NSIDE",
    "Ordering",
    "HealpixSampling",
    "PatchSampling",
    "RingSampling",
    "healpix_new",
    "ring_sampling",
    "extract_patch",
    "nside2npix",
    "pix2ang_ring",
    "pix2ang_nest",
    "ang2pix_ring",
    "ang2pix_nest",
    "ring2nest",
    "nest2ring",
    "neighbours_nest",
    "pixel_corners_nest",
    "unit_vectors",
]

MAX_NSIDE = 256

# ring index (in units of n_side) of each face's southern corner, and the
# longitude of each face centre in units of pi/4
_JRLL = np.array([2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4], dtype=np.int64)
_JPLL = np.array([1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7], dtype=np.int64)

# (dx, dy) in face coordinates, in the order SW, W, NW, N, NE, E, SE, S
_NEIGHBOUR_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


class Ordering(str, enum.Enum):
    RING = "RING"
    NESTED = "NESTED"


def _check_nside(n_side, cap=MAX_NSIDE):
    if isinstance(n_side, bool) or not isinstance(n_side, (int, np.integer)):
        raise ValueError(f"n_side must be an integer, got {n_side!r}")
    n_side = int(n_side)
    if n_side < 1 or n_side & (n_side - 1) or n_side > cap:
        raise ValueError(f"n_side must be a power of two in [1, {cap}], got {n_side}")
    return n_side


def nside2npix(n_side):
    return 12 * n_side * n_side


def _order(n_side):
    return n_side.bit_length() - 1


def unit_vectors(theta, phi):
    """Cartesian unit vectors for colatitude ``theta`` and longitude ``phi``."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _isqrt(v):
    v = np.asarray(v, dtype=np.int64)
    r = np.floor(np.sqrt(v.astype(np.float64))).astype(np.int64)
    # guard against rounding in the float sqrt
    r = np.where(r * r > v, r - 1, r)
    r = np.where((r + 1) * (r + 1) <= v, r + 1, r)
    return r


def _check_pix(n_side, pix):
    pix = np.asarray(pix)
    if not np.issubdtype(pix.dtype, np.integer):
        raise TypeError("pixel indices must be integers")
    npix = nside2npix(n_side)
    if np.any(pix < 0) or np.any(pix >= npix):
        raise IndexError(f"pixel index out of range [0, {npix})")
    return pix.astype(np.int64)


# --------------------------------------------------------------------------
# RING scheme


def pix2ang_ring(n_side, pix):
    """Centre angles ``(theta, phi)`` of RING pixels."""
    pix = _check_pix(n_side, pix)
    ns = n_side
    npix = nside2npix(ns)
    ncap = 2 * ns * (ns - 1)
    z = np.empty(pix.shape)
    phi = np.empty(pix.shape)

    north = pix < ncap
    south = pix >= npix - ncap
    belt = ~(north | south)

    p = pix[north]
    iring = (1 + _isqrt(1 + 2 * p)) >> 1
    iphi = p + 1 - 2 * iring * (iring - 1)
    z[north] = 1.0 - iring**2 / (3.0 * ns * ns)
    phi[north] = (iphi - 0.5) * np.pi / (2.0 * iring)

    ip = pix[belt] - ncap
    iring = ip // (4 * ns) + ns
    iphi = ip % (4 * ns) + 1
    fodd = np.where((iring + ns) & 1, 1.0, 0.5)
    z[belt] = (2 * ns - iring) * 2.0 / (3.0 * ns)
    phi[belt] = (iphi - fodd) * np.pi / (2.0 * ns)

    ip = npix - pix[south]
    iring = (1 + _isqrt(2 * ip - 1)) >> 1
    iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1))
    z[south] = -1.0 + iring**2 / (3.0 * ns * ns)
    phi[south] = (iphi - 0.5) * np.pi / (2.0 * iring)

    return np.arccos(np.clip(z, -1.0, 1.0)), phi


def _prep_angles(theta, phi):
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(np.isnan(theta)) or np.any(np.isnan(phi)):
        raise ValueError("NaN angle")
    if np.any(theta < 0) or np.any(theta > np.pi):
        raise ValueError("theta must lie in [0, pi]")
    theta, phi = np.broadcast_arrays(theta, phi)
    z = np.cos(theta)
    tt = np.mod(phi, 2 * np.pi) * (2.0 / np.pi)
    tt = np.where(tt >= 4.0, 0.0, tt)
    return z, tt


def ang2pix_ring(n_side, theta, phi):
    """RING index of the pixel containing each point."""
    ns = n_side
    z, tt = _prep_angles(theta, phi)
    za = np.abs(z)
    npix = nside2npix(ns)
    ncap = 2 * ns * (ns - 1)
    pix = np.empty(z.shape, dtype=np.int64)

    eq = za <= 2.0 / 3.0
    t1 = ns * (0.5 + tt[eq])
    t2 = ns * z[eq] * 0.75
    jp = np.floor(t1 - t2).astype(np.int64)
    jm = np.floor(t1 + t2).astype(np.int64)
    ir = ns + 1 + jp - jm
    kshift = 1 - (ir & 1)
    ip = (jp + jm - ns + kshift + 1) // 2
    ip = np.mod(ip, 4 * ns)
    pix[eq] = ncap + (ir - 1) * 4 * ns + ip

    cap = ~eq
    ttc = tt[cap]
    zc = z[cap]
    tp = ttc - np.floor(ttc)
    tmp = ns * np.sqrt(3.0 * (1.0 - np.abs(zc)))
    jp = np.floor(tp * tmp).astype(np.int64)
    jm = np.floor((1.0 - tp) * tmp).astype(np.int64)
    ir = jp + jm + 1
    ip = np.floor(ttc * ir).astype(np.int64)
    ip = np.mod(ip, 4 * ir)
    pix[cap] = np.where(zc > 0, 2 * ir * (ir - 1) + ip, npix - 2 * ir * (ir + 1) + ip)
    return pix


# --------------------------------------------------------------------------
# face coordinates and the NESTED scheme


def _spread_bits(v, nbits):
    out = np.zeros_like(v)
    for b in range(nbits):
        out |= ((v >> b) & 1) << (2 * b)
    return out


def _compress_bits(v, nbits):
    out = np.zeros_like(v)
    for b in range(nbits):
        out |= ((v >> (2 * b)) & 1) << b
    return out


def _xyf2nest(n_side, ix, iy, face):
    nb = _order(n_side)
    return face * n_side * n_side + _spread_bits(ix, nb) + (_spread_bits(iy, nb) << 1)


def _nest2xyf(n_side, pix):
    nb = _order(n_side)
    face = pix >> (2 * nb)
    ipf = pix & (n_side * n_side - 1)
    return _compress_bits(ipf, nb), _compress_bits(ipf >> 1, nb), face


def _xyf2ring(n_side, ix, iy, face):
    ns = n_side
    nl4 = 4 * ns
    npix = nside2npix(ns)
    ncap = 2 * ns * (ns - 1)
    jr = _JRLL[face] * ns - ix - iy - 1

    nr = np.where(jr < ns, jr, np.where(jr > 3 * ns, nl4 - jr, ns))
    n_before = np.where(
        jr < ns,
        2 * nr * (nr - 1),
        np.where(jr > 3 * ns, npix - 2 * (nr + 1) * nr, ncap + (jr - ns) * nl4),
    )
    kshift = np.where((jr >= ns) & (jr <= 3 * ns), (jr - ns) & 1, 0)

    jp = (_JPLL[face] * nr + ix - iy + 1 + kshift) // 2
    jp = np.where(jp > nl4, jp - nl4, jp)
    jp = np.where(jp < 1, jp + nl4, jp)
    return n_before + jp - 1


def _ring2xyf(n_side, pix):
    ns = n_side
    nl2 = 2 * ns
    npix = nside2npix(ns)
    ncap = 2 * ns * (ns - 1)
    iring = np.empty_like(pix)
    iphi = np.empty_like(pix)
    kshift = np.zeros_like(pix)
    nr = np.empty_like(pix)
    face = np.empty_like(pix)

    north = pix < ncap
    south = pix >= npix - ncap
    belt = ~(north | south)

    p = pix[north]
    ir = (1 + _isqrt(1 + 2 * p)) >> 1
    ph = p + 1 - 2 * ir * (ir - 1)
    iring[north], iphi[north], nr[north] = ir, ph, ir
    face[north] = (ph - 1) // ir

    ip = pix[belt] - ncap
    tmp = ip // (4 * ns)
    ir = tmp + ns
    ph = ip - tmp * 4 * ns + 1
    ire = ir - ns + 1
    irm = nl2 + 2 - ire
    ifm = (ph - ire // 2 + ns - 1) // ns
    ifp = (ph - irm // 2 + ns - 1) // ns
    iring[belt], iphi[belt], nr[belt] = ir, ph, ns
    kshift[belt] = (ir + ns) & 1
    face[belt] = np.where(ifp == ifm, ifp | 4, np.where(ifp < ifm, ifp, ifm + 8))

    ip = npix - pix[south]
    ir = (1 + _isqrt(2 * ip - 1)) >> 1
    ph = 4 * ir + 1 - (ip - 2 * ir * (ir - 1))
    iring[south], iphi[south], nr[south] = 4 * ns - ir, ph, ir
    face[south] = 8 + (ph - 1) // ir

    irt = iring - _JRLL[face] * ns + 1
    ipt = 2 * iphi - _JPLL[face] * nr - kshift - 1
    ipt = np.where(ipt >= nl2, ipt - 8 * ns, ipt)
    return (ipt - irt) >> 1, (-ipt - irt) >> 1, face


def _xyf2loc(n_side, x, y, face):
    """Continuous face coordinates to ``(z, phi)``; pixel centres sit at half-integers."""
    ns = n_side
    jr = _JRLL[face] * ns - x - y
    nr = np.where(jr < ns, jr, np.where(jr > 3 * ns, 4 * ns - jr, ns)).astype(np.float64)
    z = np.where(
        jr < ns,
        1.0 - nr * nr / (3.0 * ns * ns),
        np.where(jr > 3 * ns, nr * nr / (3.0 * ns * ns) - 1.0, (2 * ns - jr) * 2.0 / (3.0 * ns)),
    )
    tmp = _JPLL[face] * nr + x - y
    tmp = np.where(tmp < 0, tmp + 8 * nr, tmp)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(nr > 0, np.pi / 4 * tmp / np.where(nr > 0, nr, 1.0), 0.0)
    return z, phi


def _zphi2xyf(n_side, z, tt):
    ns = n_side
    za = np.abs(z)
    ix = np.empty(z.shape, dtype=np.int64)
    iy = np.empty_like(ix)
    face = np.empty_like(ix)

    eq = za <= 2.0 / 3.0
    t1 = ns * (0.5 + tt[eq])
    t2 = ns * z[eq] * 0.75
    jp = np.floor(t1 - t2).astype(np.int64)
    jm = np.floor(t1 + t2).astype(np.int64)
    ifp = jp // ns
    ifm = jm // ns
    face[eq] = np.where(ifp == ifm, ifp | 4, np.where(ifp < ifm, ifp, ifm + 8))
    ix[eq] = jm & (ns - 1)
    iy[eq] = ns - (jp & (ns - 1)) - 1

    cap = ~eq
    ttc = tt[cap]
    ntt = np.minimum(np.floor(ttc).astype(np.int64), 3)
    tp = ttc - ntt
    tmp = ns * np.sqrt(3.0 * (1.0 - za[cap]))
    jp = np.minimum(np.floor(tp * tmp).astype(np.int64), ns - 1)
    jm = np.minimum(np.floor((1.0 - tp) * tmp).astype(np.int64), ns - 1)
    north = z[cap] >= 0
    face[cap] = np.where(north, ntt, ntt + 8)
    ix[cap] = np.where(north, ns - jm - 1, jp)
    iy[cap] = np.where(north, ns - jp - 1, jm)
    return ix, iy, face


def ang2pix_nest(n_side, theta, phi):
    """NESTED index of the pixel containing each point."""
    z, tt = _prep_angles(theta, phi)
    ix, iy, face = _zphi2xyf(n_side, z, tt)
    return _xyf2nest(n_side, ix, iy, face)


def pix2ang_nest(n_side, pix):
    """Centre angles of NESTED pixels, computed from face geometry."""
    pix = _check_pix(n_side, pix)
    ix, iy, face = _nest2xyf(n_side, pix)
    z, phi = _xyf2loc(n_side, ix + 0.5, iy + 0.5, face)
    return np.arccos(np.clip(z, -1.0, 1.0)), phi


def nest2ring(n_side, pix):
    pix = _check_pix(n_side, pix)
    return _xyf2ring(n_side, *_nest2xyf(n_side, pix))


def ring2nest(n_side, pix):
    pix = _check_pix(n_side, pix)
    return _xyf2nest(n_side, *_ring2xyf(n_side, pix))


def _step_across_edge(N, face, x, y):
    """Map one out-of-range face coordinate onto the adjacent face."""
    row, c = face // 4, face % 4
    x, y, face = x.copy(), y.copy(), face.copy()
    xh, xl, yh, yl = x >= N, x < 0, y >= N, y < 0
    # x first; a second call resolves the remaining coordinate at corners
    yh = yh & ~(xh | xl)
    yl = yl & ~(xh | xl)

    def put(mask, f, nx, ny):
        face[mask], x[mask], y[mask] = f[mask], nx[mask], ny[mask]

    x0, y0 = x.copy(), y.copy()
    n, e, s = row == 0, row == 1, row == 2
    put(n & xh, (c + 1) % 4, y0, 2 * N - 1 - x0)
    put(n & yh, (c + 3) % 4, 2 * N - 1 - y0, x0)
    put(n & xl, 4 + c, x0 + N, y0)
    put(n & yl, 4 + (c + 1) % 4, x0, y0 + N)
    put(e & xh, c, x0 - N, y0)
    put(e & yh, (c + 3) % 4, x0, y0 - N)
    put(e & xl, 8 + (c + 3) % 4, x0 + N, y0)
    put(e & yl, 8 + c, x0, y0 + N)
    put(s & xh, 4 + (c + 1) % 4, x0 - N, y0)
    put(s & yh, 4 + c, x0, y0 - N)
    put(s & xl, 8 + (c + 3) % 4, y0, -1 - x0)
    put(s & yl, 8 + (c + 1) % 4, -1 - y0, x0)
    return face, x, y


def neighbours_nest(n_side):
    """8-neighbourhood of every NESTED pixel, shape ``(n_pix, 8)``.

    Columns follow SW, W, NW, N, NE, E, SE, S.  Pixels touching one of the
    eight vertices where only three base faces meet lack the neighbour in that
    direction; missing entries are -1.
    """
    ns = _check_nside(n_side, cap=1 << 29)
    npix = nside2npix(ns)
    pix = np.arange(npix, dtype=np.int64)
    ix, iy, face = _nest2xyf(ns, pix)
    row = face // 4
    out = np.empty((npix, 8), dtype=np.int64)
    for j, (dx, dy) in enumerate(_NEIGHBOUR_OFFSETS):
        x, y, f = ix + dx, iy + dy, face
        xh, xl, yh, yl = x >= ns, x < 0, y >= ns, y < 0
        missing = (
            ((row == 0) & ((xl & yh) | (xh & yl)))
            | ((row == 1) & ((xh & yh) | (xl & yl)))
            | ((row == 2) & ((xh & yl) | (xl & yh)))
        )
        for _ in range(2):
            f, x, y = _step_across_edge(ns, f, x, y)
        x = np.clip(x, 0, ns - 1)
        y = np.clip(y, 0, ns - 1)
        out[:, j] = np.where(missing, -1, _xyf2nest(ns, x, y, f))
    return out


def pixel_corners_nest(n_side, pix):
    """Unit vectors of the four vertices (S, E, N, W) of NESTED pixels."""
    pix = _check_pix(n_side, pix)
    ix, iy, face = _nest2xyf(n_side, pix)
    corners = []
    for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1)):
        z, phi = _xyf2loc(n_side, ix + dx, iy + dy, face)
        corners.append(unit_vectors(np.arccos(np.clip(z, -1, 1)), phi))
    return np.stack(corners, axis=-2)


# --------------------------------------------------------------------------
# sampling objects


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class HealpixSampling:
    """Full-sphere HEALPix sampling at a fixed resolution and ordering."""

    n_side: int
    ordering: Ordering = Ordering.NESTED

    def __post_init__(self):
        object.__setattr__(self, "n_side", _check_nside(self.n_side))
        object.__setattr__(self, "ordering", Ordering(self.ordering))

    @property
    def n_pix(self):
        return nside2npix(self.n_side)

    @property
    def nested(self):
        return self.ordering is Ordering.NESTED

    @cached_property
    def _angles(self):
        pix = np.arange(self.n_pix)
        f = pix2ang_nest if self.nested else pix2ang_ring
        theta, phi = f(self.n_side, pix)
        return _frozen(theta), _frozen(np.mod(phi, 2 * np.pi))

    @property
    def theta(self):
        return self._angles[0]

    @property
    def phi(self):
        return self._angles[1]

    @cached_property
    def centers(self):
        return _frozen(unit_vectors(self.theta, self.phi))

    @property
    def pixel_area(self):
        return 4 * np.pi / self.n_pix

    def pix2ang(self, p):
        """Centre ``(theta, phi)`` of pixel ``p`` (scalar or array)."""
        p = _check_pix(self.n_side, p)
        return self.theta[p], self.phi[p]

    def ang2pix(self, theta, phi):
        f = ang2pix_nest if self.nested else ang2pix_ring
        return f(self.n_side, theta, phi)

    def ring2nest(self, p):
        return ring2nest(self.n_side, p)

    def nest2ring(self, p):
        return nest2ring(self.n_side, p)

    def _require_nested(self):
        if not self.nested:
            raise OrderingError("hierarchy operations need NESTED ordering")

    def parent(self, p):
        """Index of the enclosing pixel at ``n_side / 2``."""
        self._require_nested()
        if self.n_side < 2:
            raise ValueError("n_side=1 has no coarser level")
        return _check_pix(self.n_side, p) // 4

    def children(self, p):
        """The 4 NESTED sub-pixels of ``p`` at ``2 n_side``, shape ``(..., 4)``."""
        self._require_nested()
        p = _check_pix(self.n_side, p)
        return 4 * p[..., None] + np.arange(4)

    def coarsen(self):
        return HealpixSampling(self.n_side // 2, self.ordering)

    def neighbours(self):
        """8-neighbour table in this sampling's ordering (-1 where missing)."""
        nb = neighbours_nest(self.n_side)
        if self.nested:
            return nb
        perm = ring2nest(self.n_side, np.arange(self.n_pix))
        nb = nb[perm]
        return np.where(nb < 0, -1, nest2ring(self.n_side, np.maximum(nb, 0)))


def healpix_new(n_side, ordering=Ordering.NESTED):
    return HealpixSampling(n_side, ordering)


@dataclass(frozen=True)
class PatchSampling:
    """One of the ``12 o^2`` NESTED-contiguous blocks of a HEALPix sphere."""

    parent: HealpixSampling
    order: int
    base_index: int

    @property
    def n_pix(self):
        return self.parent.n_pix // (12 * self.order**2)

    @property
    def n_side(self):
        return self.parent.n_side

    @property
    def area_fraction(self):
        return 1.0 / (12 * self.order**2)

    @cached_property
    def pixel_indices(self):
        start = self.base_index * self.n_pix
        return _frozen(np.arange(start, start + self.n_pix))

    @property
    def theta(self):
        return self.parent.theta[self.pixel_indices]

    @property
    def phi(self):
        return self.parent.phi[self.pixel_indices]

    @property
    def centers(self):
        return self.parent.centers[self.pixel_indices]

    def coarsen(self):
        """Same region on the sphere at half the resolution."""
        return PatchSampling(self.parent.coarsen(), self.order, self.base_index)


def extract_patch(s, order, base_index):
    """Patch ``base_index`` of the order-``order`` partition of ``s``."""
    if not s.nested:
        raise OrderingError("patches are defined on NESTED samplings")
    if order < 1 or order & (order - 1) or order > s.n_side:
        raise ValueError(f"order must be a power of two in [1, n_side], got {order}")
    if not 0 <= base_index < 12 * order**2:
        raise ValueError(f"base_index must lie in [0, {12 * order**2})")
    return PatchSampling(s, int(order), int(base_index))


@dataclass(frozen=True)
class RingSampling:
    """``n`` regularly spaced points ``(cos t, sin t)`` on the unit circle."""

    n: int
    angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"ring sampling needs n >= 3, got {self.n}")
        object.__setattr__(self, "angles", _frozen(2 * np.pi * np.arange(self.n) / self.n))

    @property
    def n_pix(self):
        return self.n

    @property
    def points(self):
        return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=-1)


def ring_sampling(n):
    return RingSampling(int(n))
