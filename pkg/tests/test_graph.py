import numpy as np
import pytest
import scipy.sparse as sp
from scipy.spatial import cKDTree

from sphereflow.exceptions import ShapeError
from sphereflow.graph import (LaplacianKind, SphereGraph, build_healpix_graph, build_ring_graph,
                              estimate_lambda_max, laplacian_apply, read_edge_list,
                              write_edge_list)
from sphereflow.sampling import (extract_patch, healpix_new, nside2npix, pix2ang_nest,
                                 pixel_corners_nest)

KINDS = list(LaplacianKind)


def corner_adjacency(n_side):
    """Neighbour pairs (u < v) from shared pixel-outline vertices."""
    n = nside2npix(n_side)
    corners = pixel_corners_nest(n_side, np.arange(n)).reshape(-1, 3)
    owner = np.repeat(np.arange(n), 4)
    pairs = set()
    for a, b in cKDTree(corners).query_pairs(1e-9 / n_side):
        u, v = owner[a], owner[b]
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    return np.array(sorted(pairs))


@pytest.mark.parametrize("n_side", [1, 2, 4])
@pytest.mark.parametrize("kind", KINDS)
def test_structure(n_side, kind):
    g = build_healpix_graph(healpix_new(n_side), kind=kind)
    w = g.weights
    assert abs(w - w.T).max() == 0
    assert np.all(w.diagonal() == 0)
    lap = g.dense_laplacian()
    np.testing.assert_array_equal(lap, lap.T)
    lam = np.linalg.eigvalsh(lap)
    assert lam.min() > -1e-10
    if kind is LaplacianKind.COMBINATORIAL:
        assert np.abs(lap.sum(axis=1)).max() < 1e-10
    else:
        assert lam.max() <= 2 + 1e-10


@pytest.mark.parametrize("n_side", [1, 2, 4])
def test_against_independent_construction(n_side):
    pairs = corner_adjacency(n_side)
    th, ph = pix2ang_nest(n_side, np.arange(nside2npix(n_side)))
    x = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], 1)
    d = np.linalg.norm(x[pairs[:, 0]] - x[pairs[:, 1]], axis=1)
    sigma = d.mean()
    g = build_healpix_graph(healpix_new(n_side))
    assert g.sigma == pytest.approx(sigma, rel=1e-12)
    u, v, w = g.edges()
    np.testing.assert_array_equal(np.stack([u, v], 1), pairs)
    np.testing.assert_allclose(w, np.exp(-d ** 2 / (2 * sigma ** 2)), rtol=1e-12)


def test_nside1():
    g = build_healpix_graph(healpix_new(1))
    assert np.all(np.diff(g.weights.indptr) >= 6)
    assert g.is_connected()


@pytest.mark.parametrize("n_side", [1, 2, 4, 8, 16, 32])
def test_connected(n_side):
    assert build_healpix_graph(healpix_new(n_side)).is_connected()


def test_equal_distance_equal_weight():
    g = build_healpix_graph(healpix_new(4))
    u, v, w = g.edges()
    d = np.round(np.linalg.norm(g.coords[u] - g.coords[v], axis=1), 12)
    for dist in np.unique(d):
        sel = w[d == dist]
        assert np.ptp(sel) < 1e-14


def test_large_sigma_weights_to_one():
    s = healpix_new(2)
    prev = 0.0
    for sigma in [1.0, 10.0, 1e3, 1e6]:
        w = build_healpix_graph(s, sigma=sigma).weights.data
        assert w.min() >= prev
        prev = w.min()
    assert prev > 1 - 1e-11


@pytest.mark.parametrize("sigma", [0.0, -1.0, "wide"])
def test_bad_sigma(sigma):
    with pytest.raises(ValueError):
        build_healpix_graph(healpix_new(2), sigma=sigma)


def test_knn():
    s = healpix_new(4)
    g = build_healpix_graph(s, neighbors=12)
    assert abs(g.weights - g.weights.T).max() == 0
    _, idx = cKDTree(s.centers).query(s.centers, k=13)
    for p in range(s.n_pix):
        assert set(idx[p, 1:]) <= set(g.weights[p].indices)
    with pytest.raises(ValueError):
        build_healpix_graph(s, neighbors=s.n_pix)
    with pytest.raises(ValueError):
        build_healpix_graph(s, neighbors="queen")


def test_patch_is_induced_subgraph():
    s = healpix_new(8)
    p = extract_patch(s, 2, 3)
    full = build_healpix_graph(s)
    sub = build_healpix_graph(p)
    idx = p.pixel_indices
    assert abs(sub.weights - full.weights[idx][:, idx]).max() == 0


def test_invalid_weights():
    with pytest.raises(ValueError):
        SphereGraph(sp.csr_matrix(np.array([[0, 1.0], [0.5, 0]])))
    with pytest.raises(ValueError):
        SphereGraph(sp.csr_matrix(np.array([[0, -1.0], [-1.0, 0]])))
    with pytest.raises(ShapeError):
        SphereGraph(sp.csr_matrix(np.zeros((2, 3))))


class TestRing:
    def test_n4_rows(self):
        lap = build_ring_graph(4).dense_laplacian()
        for i in range(4):
            np.testing.assert_array_equal(np.roll(lap[i], -i), [2, -1, 0, -1])

    def test_n8_spectrum(self):
        lam = np.linalg.eigvalsh(build_ring_graph(8).dense_laplacian())
        k = np.arange(8)
        np.testing.assert_allclose(lam, np.sort(2 - 2 * np.cos(2 * np.pi * k / 8)), atol=1e-12)
        assert np.sum(lam < 1e-10) == 1

    @pytest.mark.parametrize("n", [3, 8, 13])
    def test_commutes_with_shift(self, n):
        lap = build_ring_graph(n).dense_laplacian()
        shift = np.roll(np.eye(n), 1, axis=0)
        assert np.abs(lap @ shift - shift @ lap).max() < 1e-12


class TestApply:
    def test_constant(self, comb_graph2):
        assert np.abs(laplacian_apply(comb_graph2, np.ones(48))).max() < 1e-12

    def test_indicator(self, comb_graph2):
        g = comb_graph2
        v = 17
        y = laplacian_apply(g, np.eye(g.n)[v])
        assert y[v] == pytest.approx(g.degrees[v])
        row = g.weights[v]
        np.testing.assert_allclose(y[row.indices], -row.data)
        others = np.setdiff1d(np.arange(g.n), np.r_[row.indices, v])
        assert np.all(y[others] == 0)

    @pytest.mark.parametrize("n_side", [2, 16])
    @pytest.mark.parametrize("kind", KINDS)
    def test_dense_oracle(self, n_side, kind, rng):
        g = build_healpix_graph(healpix_new(n_side), kind=kind)
        w = g.weights.toarray()
        d = w.sum(axis=1)
        if kind is LaplacianKind.COMBINATORIAL:
            lap = np.diag(d) - w
        else:
            lap = np.eye(g.n) - w / np.sqrt(np.outer(d, d))
        x = rng.standard_normal((g.n, 3))
        y = laplacian_apply(g, x)
        assert np.abs(y - lap @ x).max() <= 1e-10 * np.abs(lap @ x).max()
        if n_side == 2:
            assert np.abs(y - lap @ x).max() < 1e-12

    def test_psd(self, graph4, rng):
        for g in (graph4, graph4.with_kind(LaplacianKind.COMBINATORIAL)):
            x = rng.standard_normal((g.n, 100))
            assert np.all(np.einsum("ij,ij->j", x, laplacian_apply(g, x)) >= -1e-12)

    def test_shape_error(self, graph2):
        with pytest.raises(ShapeError):
            laplacian_apply(graph2, np.ones(47))

    def test_deterministic(self, graph4, rng):
        x = rng.standard_normal(graph4.n)
        g2 = build_healpix_graph(healpix_new(4))
        assert np.array_equal(laplacian_apply(graph4, x), laplacian_apply(g2, x))


class TestLambdaMax:
    def test_ring8(self):
        lm = estimate_lambda_max(build_ring_graph(8))
        assert 4 <= lm <= 4.04

    @pytest.mark.parametrize("n_side", [1, 2, 4])
    @pytest.mark.parametrize("kind", KINDS)
    def test_bounds(self, n_side, kind):
        g = build_healpix_graph(healpix_new(n_side), kind=kind)
        exact = np.linalg.eigvalsh(g.dense_laplacian()).max()
        lm = g.lambda_max
        assert exact <= lm <= 1.01 * exact + 1e-12
        if kind is LaplacianKind.NORMALIZED:
            assert lm <= 2.02


def test_edge_list_round_trip(tmp_path, graph4):
    path = tmp_path / "g.txt"
    write_edge_list(graph4, path)
    lines = path.read_text().splitlines()
    assert len([ln for ln in lines if not ln.startswith("#")]) == graph4.n_edges
    g = read_edge_list(path)
    assert abs(g.weights - graph4.weights).max() == 0
