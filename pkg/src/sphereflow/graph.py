"""Pixel graphs over sphere and circle samplings, and their sparse Laplacians."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import ShapeError
from .sampling import HealpixSampling, PatchSampling, RingSampling

__all__ = [
    "LaplacianKind",
    "SphereGraph",
    "build_healpix_graph",
    "build_ring_graph",
    "laplacian_apply",
    "estimate_lambda_max",
    "write_edge_list",
    "read_edge_list",
]


class LaplacianKind(str, enum.Enum):
    COMBINATORIAL = "combinatorial"
    NORMALIZED = "normalized"


def _canonical_csr(w):
    w = sp.csr_matrix(w, dtype=np.float64)
    w.setdiag(0.0)
    w.eliminate_zeros()
    w.sum_duplicates()
    w.sort_indices()
    return w


@dataclass(frozen=True, eq=False)
class SphereGraph:
    """Weighted undirected graph with a cached Laplacian.

    ``weights`` is a symmetric CSR matrix with sorted column indices and an
    empty diagonal.  ``coords`` holds vertex positions when the graph comes
    from a sampling (used for KNN rebuilds and edge-length statistics).
    """

    weights: sp.csr_matrix
    kind: LaplacianKind = LaplacianKind.NORMALIZED
    sigma: float | None = None
    coords: np.ndarray | None = None

    def __post_init__(self):
        w = _canonical_csr(self.weights)
        if w.shape[0] != w.shape[1]:
            raise ShapeError("weight matrix must be square")
        if (w.data < 0).any():
            raise ValueError("edge weights must be nonnegative")
        if abs(w - w.T).max() > 0:
            raise ValueError("weight matrix must be symmetric")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kind", LaplacianKind(self.kind))

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def n_edges(self):
        return self.weights.nnz // 2

    @cached_property
    def degrees(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @cached_property
    def laplacian(self):
        """Sparse Laplacian of the configured kind (CSR, sorted indices)."""
        w = self.weights
        if self.kind is LaplacianKind.COMBINATORIAL:
            lap = sp.diags(self.degrees) - w
        else:
            d = self.degrees
            dinv = np.zeros_like(d)
            dinv[d > 0] = 1.0 / np.sqrt(d[d > 0])
            # w_ij * (s_i * s_j) is bitwise symmetric, unlike D^-1/2 W D^-1/2
            coo = w.tocoo()
            scaled = sp.csr_matrix(
                (coo.data * (dinv[coo.row] * dinv[coo.col]), (coo.row, coo.col)), shape=w.shape)
            lap = sp.diags((d > 0).astype(np.float64)) - scaled
        lap = sp.csr_matrix(lap)
        lap.sort_indices()
        return lap

    def dense_laplacian(self):
        return self.laplacian.toarray()

    @cached_property
    def lambda_max(self):
        return estimate_lambda_max(self)

    def is_connected(self):
        return connected_components(self.weights, directed=False)[0] == 1

    def with_kind(self, kind):
        return SphereGraph(self.weights, kind, self.sigma, self.coords)

    def subgraph(self, vertices):
        """Induced subgraph on ``vertices`` (kept in the given order)."""
        vertices = np.asarray(vertices, dtype=np.int64)
        w = self.weights[vertices][:, vertices]
        coords = None if self.coords is None else self.coords[vertices]
        return SphereGraph(w, self.kind, self.sigma, coords)

    def permute(self, perm):
        """Relabel vertices so that new vertex ``i`` is old vertex ``perm[i]``."""
        return self.subgraph(perm)

    def edges(self):
        """Upper-triangle edge list as arrays ``(u, v, w)``."""
        coo = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def _gaussian_weights(rows, cols, coords, sigma):
    d2 = np.sum((coords[rows] - coords[cols]) ** 2, axis=1)
    return np.exp(-d2 / (2.0 * sigma**2))


def _healpix_pairs(sampling, neighbors):
    if neighbors == "healpix8":
        nb = sampling.neighbours()
        rows = np.repeat(np.arange(sampling.n_pix), nb.shape[1])
        cols = nb.ravel()
        keep = cols >= 0
        return rows[keep], cols[keep]
    if isinstance(neighbors, (int, np.integer)) and not isinstance(neighbors, bool):
        from scipy.spatial import cKDTree

        k = int(neighbors)
        if not 0 < k < sampling.n_pix:
            raise ValueError(f"k must lie in [1, n_pix), got {k}")
        _, idx = cKDTree(sampling.centers).query(sampling.centers, k=k + 1)
        rows = np.repeat(np.arange(sampling.n_pix), k)
        return rows, idx[:, 1:].ravel()
    raise ValueError(f"unknown neighbour rule {neighbors!r}")


def build_healpix_graph(sampling, neighbors="healpix8", sigma="auto",
                        kind=LaplacianKind.NORMALIZED):
    """Gaussian-kernel graph over a HEALPix sampling or patch.

    Parameters
    ----------
    sampling
        ``HealpixSampling`` or ``PatchSampling``.  Patches get the induced
        subgraph of the full-sphere graph; no boundary compensation.
    neighbors
        ``"healpix8"`` for the HEALPix tessellation neighbours (8, or 7 at the
        three-face vertices), or an integer ``k`` for a symmetrized k-NN graph.
    sigma
        Kernel width of ``w = exp(-|x_i - x_j|^2 / (2 sigma^2))``; ``"auto"``
        uses the mean neighbour distance.
    kind
        Laplacian used for filtering.
    """
    if isinstance(sampling, PatchSampling):
        full = build_healpix_graph(sampling.parent, neighbors, sigma, kind)
        return full.subgraph(sampling.pixel_indices)
    if not isinstance(sampling, HealpixSampling):
        raise TypeError("expected a HealpixSampling or PatchSampling")
    rows, cols = _healpix_pairs(sampling, neighbors)
    # symmetrize (KNN is not symmetric); duplicates collapse to one edge
    pairs = np.unique(np.concatenate([
        np.stack([rows, cols], 1), np.stack([cols, rows], 1)]), axis=0)
    rows, cols = pairs[:, 0], pairs[:, 1]
    x = sampling.centers
    if isinstance(sigma, str):
        if sigma != "auto":
            raise ValueError(f"sigma must be positive or 'auto', got {sigma!r}")
        sigma = float(np.mean(np.linalg.norm(x[rows] - x[cols], axis=1)))
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    w = sp.csr_matrix((_gaussian_weights(rows, cols, x, sigma), (rows, cols)),
                      shape=(sampling.n_pix,) * 2)
    return SphereGraph(w, kind, float(sigma), np.asarray(x))


def build_ring_graph(ring, kind=LaplacianKind.COMBINATORIAL):
    """Cycle graph with unit weights over a regular circle sampling."""
    if not isinstance(ring, RingSampling):
        ring = RingSampling(int(ring))
    n = ring.n
    i = np.arange(n)
    rows = np.concatenate([i, i])
    cols = np.concatenate([(i + 1) % n, (i - 1) % n])
    w = sp.csr_matrix((np.ones(2 * n), (rows, cols)), shape=(n, n))
    return SphereGraph(w, kind, None, ring.points)


def laplacian_apply(g, x):
    """``L @ x`` for a signal of shape ``(n,)`` or ``(n, channels)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.n:
        raise ShapeError(f"signal has {x.shape[0]} vertices, graph has {g.n}")
    return g.laplacian @ x


def estimate_lambda_max(g, rtol=1e-3, max_iter=20000):
    """Upper bound on the largest Laplacian eigenvalue.

    Power iteration until the eigen-residual falls below ``rtol`` relative to
    the Rayleigh quotient, inflated by 1% and clipped to the Gershgorin bound.
    """
    lap = g.laplacian
    n = g.n
    absrow = np.asarray(abs(lap).sum(axis=1)).ravel()
    gersh = float(absrow.max()) if n else 0.0
    if gersh == 0.0:
        return 0.0
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(max_iter):
        w = lap @ v
        rho = float(v @ w)
        res = np.linalg.norm(w - rho * v)
        if res <= rtol * rho:
            break
        v = w / np.linalg.norm(w)
    return min(1.01 * rho, gersh)


def write_edge_list(g, path):
    """Write ``u v w`` lines (u < v, 17 significant digits)."""
    u, v, w = g.edges()
    with open(path, "w") as fh:
        fh.write(f"# n={g.n}\n")
        for a, b, c in zip(u, v, w):
            fh.write(f"{a} {b} {c:.17g}\n")


def read_edge_list(path, kind=LaplacianKind.NORMALIZED):
    n = None
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# n="):
                    n = int(line[4:])
                continue
            a, b, c = line.split()
            rows.append(int(a))
            cols.append(int(b))
            vals.append(float(c))
    if n is None:
        n = max(max(rows), max(cols)) + 1
    rows, cols, vals = np.array(rows), np.array(cols), np.array(vals)
    w = sp.csr_matrix((np.r_[vals, vals], (np.r_[rows, cols], np.r_[cols, rows])), shape=(n, n))
    return SphereGraph(w, kind)
