"""Graph Fourier basis and the degree-block structure of its eigenvalues."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CapacityError, ShapeError
from .linalg import eigh

__all__ = [
    "DENSE_LIMIT",
    "SpectralBasis",
    "DegreeBlocks",
    "eigendecompose",
    "gft",
    "igft",
    "sphere_group_sizes",
    "circle_group_sizes",
    "detect_degree_blocks",
    "write_eigenvalues_csv",
]

DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigenpairs ``L = U diag(eigenvalues) U^T`` with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    graph: object = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.eigenvalues)


def eigendecompose(g, max_n=DENSE_LIMIT):
    """Full eigendecomposition of the graph Laplacian (dense path)."""
    if g.n > max_n:
        raise CapacityError(
            f"dense eigendecomposition is capped at n={max_n} (graph has {g.n}); "
            "use a partial (Lanczos) solver for larger graphs")
    lam, u = eigh(g.dense_laplacian())
    return SpectralBasis(lam, u, g)


def _check_len(b, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != b.n:
        raise ShapeError(f"signal length {x.shape[0]} does not match basis size {b.n}")
    return x


def gft(b, x):
    """Graph Fourier coefficients ``U^T x``."""
    return b.eigenvectors.T @ _check_len(b, x)


def igft(b, c):
    return b.eigenvectors @ _check_len(b, c)


def sphere_group_sizes(n):
    """Nominal block sizes 1, 3, 5, ... while they fit in ``n`` eigenvalues."""
    sizes, total, ell = [], 0, 0
    while total + 2 * ell + 1 <= n:
        sizes.append(2 * ell + 1)
        total += 2 * ell + 1
        ell += 1
    return sizes


def circle_group_sizes(n):
    """Block sizes of the cycle graph: the constant, cos/sin pairs, and for even
    ``n`` the alternating vector."""
    sizes = [1] + [2] * ((n - 1) // 2)
    if n % 2 == 0:
        sizes.append(1)
    return sizes


@dataclass(frozen=True)
class DegreeBlocks:
    """Partition of eigenvalue indices into consecutive degree groups.

    ``boundaries`` has one more entry than ``sizes``: group ``l`` spans
    ``boundaries[l]:boundaries[l+1]``.  ``matched[l]`` records whether the
    spectral gap after group ``l`` confirmed the boundary; ``ell_max`` is the
    largest degree such that every group up to it matched.
    """

    boundaries: tuple
    sizes: tuple
    matched: tuple
    ell_max: int
    diagnostic: str = ""

    def group(self, ell):
        return slice(self.boundaries[ell], self.boundaries[ell + 1])

    @property
    def n_groups(self):
        return len(self.sizes)


def detect_degree_blocks(b, gap_factor=3.0, sizes=None):
    """Greedy scan of the spectrum for groups of nominal sizes ``2l + 1``.

    A boundary after group ``l`` is confirmed when the eigenvalue gap there
    exceeds ``gap_factor`` times the median of the gaps inside group ``l``
    and the following nominal group.  Pass ``sizes`` (e.g.
    :func:`circle_group_sizes`) for other manifolds.
    """
    lam = np.asarray(b.eigenvalues if hasattr(b, "eigenvalues") else b, dtype=np.float64)
    n = len(lam)
    if sizes is None:
        sizes = sphere_group_sizes(n)
    sizes = list(sizes)
    gaps = np.diff(lam)
    floor = 1e-12 * max(float(np.max(np.abs(lam))), np.finfo(float).tiny) if n else 0.0

    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    if bounds[-1] > n:
        raise ValueError("group sizes exceed the number of eigenvalues")

    matched = []
    for ell in range(len(sizes)):
        start, end = bounds[ell], bounds[ell + 1]
        if end == n:
            matched.append(True)
            continue
        nxt = bounds[ell + 2] if ell + 2 < len(bounds) else n
        inner = np.concatenate([gaps[start:end - 1], gaps[end:nxt - 1]])
        ref = float(np.median(inner)) if inner.size else 0.0
        matched.append(bool(gaps[end - 1] > gap_factor * ref + floor))

    ell_max = -1
    for ok in matched:
        if not ok:
            break
        ell_max += 1
    diagnostic = ""
    if ell_max < 1:
        diagnostic = "no degree-block structure detected"
        ell_max = max(ell_max, 0)
    return DegreeBlocks(tuple(bounds), tuple(sizes), tuple(matched), ell_max, diagnostic)


def write_eigenvalues_csv(b, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "lambda"])
        for i, v in enumerate(b.eigenvalues):
            w.writerow([i, f"{v:.17g}"])
