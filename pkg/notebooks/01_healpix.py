# %% [markdown]
# # HEALPix sampling
#
# Pixel counts, the two orderings, the neighbour structure and the
# NESTED-contiguous patches used by the classifier.

# %%
import numpy as np

from sphereflow import Ordering, extract_patch, healpix_new
from sphereflow.sampling import nest2ring

for n_side in (1, 2, 4, 8, 16):
    print(f"n_side {n_side:3d}: {healpix_new(n_side).n_pix:5d} pixels")

# %% [markdown]
# RING numbers pixels along iso-latitude rings, NESTED numbers them along
# the quad-tree of each base face.  At n_side 1 the two coincide.

# %%
s = healpix_new(4, Ordering.NESTED)
print("first NESTED pixels in RING numbering:", nest2ring(4, np.arange(8)))
print("colatitude of NESTED 0..3:", np.round(s.theta[:4], 4))

# %% [markdown]
# Every pixel has 8 neighbours except 24 pixels at the corners where three
# base faces meet, which have 7.

# %%
counts = (s.neighbours() >= 0).sum(axis=1)
print({int(c): int((counts == c).sum()) for c in np.unique(counts)})

# %% [markdown]
# A patch of order o is one of the 12 o^2 super-pixels; in NESTED order it
# is a contiguous run of indices.

# %%
full = healpix_new(16)
for order in (1, 2):
    p = extract_patch(full, order, 0)
    idx = p.pixel_indices
    print(f"order {order}: {p.n_pix} pixels, area {100 * p.area_fraction:.2f}% of the sphere, "
          f"indices {idx[0]}..{idx[-1]} contiguous={bool(np.all(np.diff(idx) == 1))}")
