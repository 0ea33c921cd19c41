"""Graph-based signal processing on the sphere: HEALPix sampling, sphere-graph
Laplacians, Chebyshev graph convolutions, spherical harmonics and
rotation-equivariance analyses."""

from .chebyshev import ChebFilterBank, cheb_apply, cheb_grad, scale_laplacian
from .graph import LaplacianKind, SphereGraph, build_healpix_graph, build_ring_graph
from .harmonics import HarmonicBasis, eval_harmonics, psd, rotate_z, sht_analysis, sht_synthesis
from .sampling import HealpixSampling, Ordering, PatchSampling, RingSampling, extract_patch, \
    healpix_new
from .spectral import SpectralBasis, detect_degree_blocks, eigendecompose

__version__ = "0.1.0"
