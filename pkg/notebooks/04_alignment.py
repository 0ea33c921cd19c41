# %% [markdown]
# # Eigenvectors and spherical harmonics
#
# For each eigenvector group, the share of its energy carried by each
# harmonic degree.  A diagonal close to one means that the graph Fourier
# basis approximates the harmonic basis degree by degree.

# %%
import numpy as np

from sphereflow.equivariance import sphere_alignment

am = sphere_alignment(4)
np.set_printoptions(precision=3, suppress=True, linewidth=140)
print(am.matrix)
print("diagonal:", am.diagonal[:9])

# %% [markdown]
# The same summary at a finer resolution.

# %%
for n_side in (4, 8):
    a = sphere_alignment(n_side)
    print(f"n_side {n_side}: mean diagonal for ell <= 8 = {a.mean_diagonal(8):.5f}")
