# %% [markdown]
# # The regular circle
#
# On a cycle graph the Laplacian eigenvectors are the Fourier modes, so
# graph filters equal circular convolutions and commute with shifts.

# %%
import numpy as np

from sphereflow import RingSampling, build_ring_graph
from sphereflow.equivariance import circle_dft_check
from sphereflow.spectral import eigendecompose

g = build_ring_graph(RingSampling(8))
lam = eigendecompose(g).eigenvalues
print("eigenvalues:", np.round(lam, 6))
print("2 - 2 cos(2 pi k / n):", np.round(np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(8) / 8)), 6))

# %% [markdown]
# The three exactness properties, for a few circle sizes.

# %%
for n in (3, 8, 12, 64):
    r = circle_dft_check(n, K=5, seed=0)
    print(n, {k: f"{r[k]:.1e}" for k in ("eigenvalue_error", "subspace_residual",
                                         "shift_residual")})
