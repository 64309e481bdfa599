# One HEALPix base face, the neighbour operator D and the reshape trick.
#
# A face at level h is a 2^h x 2^h grid of pixels numbered row by row. D has a
# one for every pair of edge-sharing pixels and minus the neighbour count on
# the diagonal, so it annihilates constant maps.
import numpy as np

import kronsep as ks
from kronsep.dense import dense_BtCB, dense_Q
from kronsep.grid import assemble_D

g = ks.new_grid(2)
print("side", g.side, "pixels", g.npix)
print(g.neighbor_counts.reshape(g.side, g.side))
print("neighbours of pixel 5:", ks.neighbors(g, 5))

# D applied to a unit spike at a corner
spike = np.zeros(g.npix)
spike[0] = 1.0
print(ks.apply_D(g, spike).reshape(g.side, g.side))

# Constant maps lie in the null space, so D^2 has rank N - 1
print("D @ ones:", np.abs(ks.apply_D(g, np.ones(g.npix))).max())
D = assemble_D(g).toarray()
print("smallest eigenvalues of D^2:", np.round(np.linalg.eigvalsh(D @ D)[:3], 12))

# The posterior precision acts on N x m blocks: D^2 U P for the prior and
# Nhits * (U A^T T A) for the data. Neither needs an mN x mN matrix.
model = ks.planck_model(g.npix)
op = ks.PosteriorOperator(g, model)
U = np.random.default_rng(0).standard_normal((g.npix, model.m))
dense = (dense_Q(g, model) + dense_BtCB(g, model)) @ ks.vectorize(U)
print("matrix-free vs dense:", np.linalg.norm(ks.vectorize(op @ U) - dense) / np.linalg.norm(dense))

# The mixing matrix for the nine Planck frequencies
np.set_printoptions(precision=3, suppress=True)
print(ks.build_mixing_matrix())
