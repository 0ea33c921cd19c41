import numpy as np
import pytest

from sphereflow.chebyshev import ChebFilterBank, cheb_apply, init_bank, scale_laplacian
from sphereflow.equivariance import (alignment_matrix, circle_dft_check, cyclic_shift,
                                     equivariance_error, lowpass_bank, max_band, ring_alignment,
                                     sphere_alignment)
from sphereflow.graph import LaplacianKind, build_healpix_graph, build_ring_graph
from sphereflow.harmonics import eval_harmonics, sht_synthesis
from sphereflow.sampling import RingSampling, healpix_new
from sphereflow.spectral import SpectralBasis, detect_degree_blocks


@pytest.fixture(scope="module")
def setup8():
    s = healpix_new(8)
    return build_healpix_graph(s), eval_harmonics(s, 8)


@pytest.fixture(scope="module")
def align4():
    return sphere_alignment(4)


def harmonic_basis_as_spectral(hb):
    lam = (hb.degrees * (hb.degrees + 1)).astype(float)
    return SpectralBasis(lam, hb.Y)


class TestAlignment:
    @pytest.mark.parametrize("measure", ["psd", "energy", "projection"])
    def test_self_alignment_identity(self, measure):
        hb = eval_harmonics(healpix_new(4), 6)
        b = harmonic_basis_as_spectral(hb)
        if measure == "projection":
            # that measure works in the degree-ordered orthonormalized basis
            q, r = np.linalg.qr(hb.Y)
            b = SpectralBasis(b.eigenvalues, q * np.sign(np.diag(r)))
        blocks = detect_degree_blocks(b)
        assert blocks.ell_max == 6
        am = alignment_matrix(b, blocks, hb, measure=measure)
        np.testing.assert_allclose(am.matrix, np.eye(7), atol=1e-8)

    def test_invariants(self, align4):
        m = align4.matrix
        assert m.shape == (9, 9)
        assert np.all(m >= 0) and np.all(m <= 1 + 1e-9)
        assert np.all(m.sum(axis=0) <= 1 + 1e-6)
        # the normalized Laplacian's null vector is sqrt(degree), nearly constant
        assert m[0, 0] > 0.9999

    def test_constant_group_pure_degree0(self):
        am = sphere_alignment(4, kind=LaplacianKind.COMBINATORIAL)
        assert am.matrix[0, 0] == pytest.approx(1.0, abs=1e-9)

    def test_good_alignment_to_degree8(self, align4):
        assert np.all(align4.diagonal[:9] > 0.75)

    def test_regression_diagonal(self, align4):
        # measured with the default graph (healpix8, sigma auto, normalized)
        ref = [1.0, 0.9995, 0.9981, 0.9956, 0.9924, 0.9896, 0.9837, 0.9881, 0.9819]
        np.testing.assert_allclose(align4.diagonal, ref, atol=0.02)

    def test_row_normalization(self, graph4, basis4):
        hb = eval_harmonics(healpix_new(4), 8)
        am = alignment_matrix(basis4, detect_degree_blocks(basis4), hb, normalize="row")
        np.testing.assert_allclose(am.matrix.sum(axis=1), 1.0, atol=1e-12)
        with pytest.raises(ValueError):
            alignment_matrix(basis4, detect_degree_blocks(basis4), hb, normalize="both")

    def test_band_precondition(self, basis4):
        blocks = detect_degree_blocks(basis4)
        with pytest.raises(ValueError):
            alignment_matrix(basis4, blocks, eval_harmonics(healpix_new(4), blocks.ell_max - 1))
        with pytest.raises(ValueError):
            alignment_matrix(basis4, blocks, eval_harmonics(healpix_new(8), 10))

    def test_padding(self):
        am = sphere_alignment(2, ell_max=7)
        assert am.matrix.shape == (8, 8)
        assert am.meta["ell_max"] == max_band(48) == 5
        assert np.all(am.matrix[6:] == 0)

    @pytest.mark.parametrize("n", [5, 8, 12])
    def test_ring_exactly_diagonal(self, n):
        m = ring_alignment(n).matrix
        np.testing.assert_allclose(m, np.eye(len(m)), atol=1e-9)


class TestEquivariance:
    def test_identity_filter(self, setup8):
        g, hb = setup8
        assert equivariance_error(g, ChebFilterBank([1.0]), hb, np.pi / 5) < 1e-8

    def test_constant_input(self):
        s = healpix_new(4)
        g = build_healpix_graph(s, kind=LaplacianKind.COMBINATORIAL)
        hb = eval_harmonics(s, 4)
        x = np.ones((3, s.n_pix))
        e = equivariance_error(g, lowpass_bank(g), hb, 1.1, signals=x)
        assert e < 1e-10

    def test_norm_independence(self, setup8):
        g, hb = setup8
        rng = np.random.default_rng(3)
        x = sht_synthesis(hb, rng.standard_normal((hb.n_coeffs, 4))).T
        bank = lowpass_bank(g)
        e1 = equivariance_error(g, bank, hb, 0.4, signals=x)
        e2 = equivariance_error(g, bank, hb, 0.4, signals=10 * x)
        assert abs(e1 - e2) < 1e-12

    def test_deterministic(self, setup8):
        g, hb = setup8
        bank = lowpass_bank(g)
        a = equivariance_error(g, bank, hb, 0.3, trials=4, seed=9)
        assert a == equivariance_error(g, bank, hb, 0.3, trials=4, seed=9)
        assert a != equivariance_error(g, bank, hb, 0.3, trials=4, seed=10)

    def test_quarter_turn_is_exact_symmetry(self):
        # the HEALPix grid is invariant under z-rotations by pi/2, so only
        # the band truncation of the rotation operator contributes
        s = healpix_new(4)
        g = build_healpix_graph(s)
        hb = eval_harmonics(s, 2 * 4 + 3)
        rng = np.random.default_rng(0)
        x = sht_synthesis(hb, rng.standard_normal((hb.n_coeffs, 3))).T
        bank = ChebFilterBank([0.5, -0.2, 0.1])
        op = scale_laplacian(g)
        y = np.stack([cheb_apply(bank, op, xi) for xi in x])
        perm = s.ang2pix(s.theta, s.phi - np.pi / 2)
        yr = np.stack([cheb_apply(bank, op, xi[perm]) for xi in x])
        np.testing.assert_allclose(yr, y[:, perm], atol=1e-12)

    def test_errors(self, setup8):
        g, hb = setup8
        with pytest.raises(ValueError):
            equivariance_error(g, init_bank(2, 2, 1, np.random.default_rng(0)), hb, 0.1)
        with pytest.raises(ValueError):
            equivariance_error(g, ChebFilterBank([0.0]), hb, 0.1, trials=1)


class TestCircle:
    def test_triangle(self):
        lam = np.linalg.eigvalsh(build_ring_graph(3).dense_laplacian())
        np.testing.assert_allclose(lam, [0, 3, 3], atol=1e-12)
        assert circle_dft_check(3)["passed"]

    @pytest.mark.parametrize("n", [8, 12, 17])
    def test_all_checks(self, n):
        r = circle_dft_check(RingSampling(n), K=5)
        assert r["eigenvalues_ok"] and r["subspaces_ok"] and r["shift_ok"]
        assert r["shift_residual"] < 1e-10

    def test_shift(self):
        x = np.arange(5.0)
        np.testing.assert_array_equal(cyclic_shift(x), [4, 0, 1, 2, 3])
        np.testing.assert_array_equal(cyclic_shift(x, -2), [2, 3, 4, 0, 1])
