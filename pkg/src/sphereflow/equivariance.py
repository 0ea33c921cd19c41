"""Harmonic analyses of sphere graphs: subspace alignment between the graph
Fourier basis and spherical harmonics, direct measurement of the rotation
equivariance error of graph filters, and the exact circle case."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chebyshev import ChebFilterBank, cheb_apply, cheb_fit, scale_laplacian
from .graph import LaplacianKind, build_healpix_graph, build_ring_graph
from .harmonics import (circle_harmonics, eval_harmonics, psd, rotate_z, sht_analysis,
                        sht_synthesis)
from .sampling import RingSampling, healpix_new
from .spectral import circle_group_sizes, detect_degree_blocks, eigendecompose

__all__ = [
    "AlignmentMatrix",
    "alignment_matrix",
    "sphere_alignment",
    "max_band",
    "ring_alignment",
    "lowpass_bank",
    "equivariance_error",
    "circle_dft_check",
    "cyclic_shift",
]


@dataclass(frozen=True, eq=False)
class AlignmentMatrix:
    """``matrix[l, l']``: share of the energy of eigenvector group ``l'``
    carried by harmonic degree ``l``."""

    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def diagonal(self):
        return np.diag(self.matrix).copy()

    def mean_diagonal(self, ell_max=None):
        d = self.diagonal
        return float(d[: None if ell_max is None else ell_max + 1].mean())


def _degree_power(hb, u, measure):
    """Per-degree power of the columns of ``u``, summed over the columns."""
    if measure == "projection":
        # coefficients in the degree-ordered orthonormalization of Y
        a = hb._qr[0].T @ u
    else:
        a = sht_analysis(hb, u)
    p = psd(a, hb.degrees).sum(axis=1)
    if measure in ("energy", "projection"):
        p = p * np.bincount(hb.degrees)
    elif measure != "psd":
        raise ValueError(f"unknown alignment measure {measure!r}")
    return p


def alignment_matrix(basis, blocks, hb, size=None, normalize="column", measure="psd"):
    """Distribution of every eigenvector group over harmonic degrees.

    Each eigenvector of group ``l'`` is analyzed on ``hb``; its per-degree
    power is summed across the ``2 l' + 1`` vectors of the group and the
    column is normalized by the group total.  ``measure`` selects the
    per-degree power: ``"psd"`` (mean over orders, the default), ``"energy"``
    (sum over orders) or ``"projection"`` (energy of the projection on the
    degree-wise orthonormalized harmonics, insensitive to the sampled Gram).

    Groups past ``hb.ell_max`` are left as zero columns; ``size`` pads the
    matrix to ``size x size``.  ``normalize="row"`` normalizes per harmonic
    degree instead.

    Raises
    ------
    ValueError
        If ``blocks.ell_max > hb.ell_max`` or the bases have different sizes.
    """
    L = hb.ell_max
    if blocks.ell_max > L:
        raise ValueError(f"harmonic band {L} is below the detected block range {blocks.ell_max}")
    if hb.n_pix != basis.eigenvectors.shape[0]:
        raise ValueError("harmonic basis and graph basis live on different samplings")
    size = L + 1 if size is None else int(size)
    if size < L + 1:
        raise ValueError("size must be at least hb.ell_max + 1")
    n_groups = min(blocks.n_groups, L + 1)
    m = np.zeros((size, size))
    for lp in range(n_groups):
        m[: L + 1, lp] = _degree_power(hb, basis.eigenvectors[:, blocks.group(lp)], measure)
    if normalize == "column":
        tot = m.sum(axis=0, keepdims=True)
    elif normalize == "row":
        tot = m.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"normalize must be 'column' or 'row', got {normalize!r}")
    m = np.divide(m, tot, out=np.zeros_like(m), where=tot > 0)
    meta = {"ell_max": L, "n_groups": n_groups, "blocks_ell_max": blocks.ell_max,
            "normalize": normalize, "measure": measure}
    return AlignmentMatrix(m, meta)


def max_band(n_pix):
    """Largest ``l`` with ``(l + 1)^2 <= n_pix``."""
    return int(np.sqrt(n_pix)) - 1


def sphere_alignment(n_side, ell_max=None, neighbors="healpix8", sigma="auto",
                     kind=LaplacianKind.NORMALIZED, gap_factor=3.0, measure="psd",
                     size=None):
    """Alignment matrix of a HEALPix graph at ``n_side``.

    The harmonic band is ``ell_max`` (default ``2 n_side``), raised to the
    detected block range if needed and clipped to :func:`max_band`.  The
    matrix is padded to ``size`` (default: the requested ``ell_max + 1``).
    """
    s = healpix_new(n_side)
    g = build_healpix_graph(s, neighbors, sigma, kind)
    basis = eigendecompose(g)
    blocks = detect_degree_blocks(basis, gap_factor)
    req = 2 * n_side if ell_max is None else int(ell_max)
    if req < 0:
        raise ValueError("ell_max must be nonnegative")
    band = min(max(req, blocks.ell_max), max_band(s.n_pix))
    hb = eval_harmonics(s, band)
    am = alignment_matrix(basis, blocks, hb, size=max(req, band) + 1 if size is None else size,
                          measure=measure)
    am.meta.update({"n_side": n_side, "neighbors": str(neighbors),
                    "sigma": float(g.sigma), "laplacian": LaplacianKind(kind).value,
                    "requested_ell_max": req, "harmonic_condition_number": hb.condition_number})
    return am


def ring_alignment(n):
    """Same pipeline on the cycle graph against the circle Fourier basis."""
    r = RingSampling(n)
    basis = eigendecompose(build_ring_graph(r))
    blocks = detect_degree_blocks(basis, sizes=circle_group_sizes(n))
    hb = circle_harmonics(r)
    return alignment_matrix(basis, blocks, hb)


def lowpass_bank(g, K=5, tau=4.0):
    """Single-channel Chebyshev fit of ``exp(-tau * lambda)``."""
    return ChebFilterBank(cheb_fit(lambda lam: np.exp(-tau * lam), K, g.lambda_max))


def equivariance_error(g, bank, hb, angle, trials=20, seed=0, signals=None):
    """Mean relative error ``|conv(R x) - R conv(x)| / |conv(x)|``.

    ``R`` is the z-rotation by ``angle`` realized as analysis, harmonic
    rotation and synthesis on ``hb``.  Test signals are white band-limited
    fields (one independent stream per trial, derived from ``seed``) unless
    ``signals`` (shape ``(trials, n)``) is given.  Single-channel banks only.
    """
    if bank.F_in != 1 or bank.F_out != 1:
        raise ValueError("equivariance_error expects a single-channel filter")
    op = scale_laplacian(g)

    def rot(x):
        return sht_synthesis(hb, rotate_z(sht_analysis(hb, x), angle, hb.degrees, hb.orders))

    if signals is None:
        streams = np.random.SeedSequence(seed).spawn(trials)
        signals = [sht_synthesis(hb, np.random.default_rng(s).standard_normal(hb.n_coeffs))
                   for s in streams]
    errs = []
    for x in signals:
        x = np.asarray(x, dtype=np.float64)
        y = cheb_apply(bank, op, x)
        ny = np.linalg.norm(y)
        if ny == 0:
            raise ValueError("filter output has zero norm (degenerate filter)")
        errs.append(np.linalg.norm(cheb_apply(bank, op, rot(x)) - rot(y)) / ny)
    return float(np.mean(errs))


def cyclic_shift(x, k=1):
    """``(S^k x)[j] = x[j - k]`` along the vertex axis."""
    return np.roll(x, k, axis=0)


def circle_dft_check(ring, K=5, seed=0, eig_tol=1e-10, subspace_tol=1e-9, shift_tol=1e-10):
    """Verify the three exactness properties of the regular circle.

    (a) Laplacian eigenvalues equal ``2 - 2 cos(2 pi k / n)``; (b) every
    eigenspace equals the span of its cos/sin DFT pair; (c) a random
    Chebyshev filter commutes with the cyclic shift.
    """
    if not isinstance(ring, RingSampling):
        ring = RingSampling(int(ring))
    n = ring.n
    g = build_ring_graph(ring)
    basis = eigendecompose(g)
    k = np.arange(n)
    expected = np.sort(2 - 2 * np.cos(2 * np.pi * k / n))
    eig_err = float(np.abs(basis.eigenvalues - expected).max())

    hb = circle_harmonics(ring)
    dft = hb.Y / np.linalg.norm(hb.Y, axis=0)
    sizes = circle_group_sizes(n)
    sub_err, start = 0.0, 0
    for s in sizes:
        d = dft[:, start:start + s]
        u = basis.eigenvectors[:, start:start + s]
        sub_err = max(sub_err, float(np.linalg.norm(u - d @ (d.T @ u), axis=0).max()))
        start += s

    rng = np.random.default_rng(seed)
    bank = ChebFilterBank(rng.standard_normal(K))
    x = rng.standard_normal(n)
    op = scale_laplacian(g)
    shift_err = float(np.abs(cheb_apply(bank, op, cyclic_shift(x))
                             - cyclic_shift(cheb_apply(bank, op, x))).max())
    report = {
        "n": n,
        "eigenvalue_error": eig_err,
        "subspace_residual": sub_err,
        "shift_residual": shift_err,
        "eigenvalues_ok": eig_err < eig_tol,
        "subspaces_ok": sub_err < subspace_tol,
        "shift_ok": shift_err < shift_tol,
    }
    report["passed"] = report["eigenvalues_ok"] and report["subspaces_ok"] and report["shift_ok"]
    return report
