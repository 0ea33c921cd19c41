# %% [markdown]
# # Laplacian spectrum of the HEALPix graph
#
# Eigenvalues come in groups of nearly equal values whose sizes 1, 3, 5, ...
# match the multiplicities of the spherical harmonic degrees.

# %%
import numpy as np

from sphereflow import build_healpix_graph, detect_degree_blocks, eigendecompose, healpix_new

g = build_healpix_graph(healpix_new(4))
basis = eigendecompose(g)
blocks = detect_degree_blocks(basis)
print(f"n = {g.n}, sigma = {g.sigma:.4f}, lambda_max estimate = {g.lambda_max:.4f}")
print(f"complete degree groups up to ell = {blocks.ell_max}")

# %%
for ell in range(blocks.ell_max + 2):
    lam = basis.eigenvalues[blocks.group(ell)]
    print(f"ell {ell:2d}: size {len(lam):2d}  range [{lam.min():.4f}, {lam.max():.4f}]  "
          f"matched={blocks.matched[ell]}")

# %% [markdown]
# Groups grow wider with the degree; past the last matched group the gaps
# between groups become comparable to the spread inside them.
