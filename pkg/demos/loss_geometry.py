"""
The spherical alignment loss, term by term
==========================================

Posterior over label embeddings, the soft loss, its gradient, and the split
into an alignment term and a uniformity term.
"""

import numpy as np

from vmfosr.augment import label_smooth
from vmfosr.losses import (
    decompose_alignment_uniformity,
    per_sample_soft_loss,
    posterior,
    r_ortho,
    vmfal_grad_z,
)
from vmfosr.numerics import finite_difference_gradient, l2_normalize, relative_error, seeded_rng

rng = seeded_rng(0)
C, p, tau = 4, 6, 0.1
M = l2_normalize(rng.standard_normal((C, p)))
z = l2_normalize(M[0] + 0.5 * rng.standard_normal(p))
S = label_smooth(0, C, 0.1)

print("posterior:", posterior(z, M, tau).round(4))
loss = per_sample_soft_loss(z[None], S[None], M, tau)[0]
align, unif = decompose_alignment_uniformity(z, S, M, tau)
print(f"loss {loss:.6f} = alignment {align:.6f} + uniformity {unif:.6f}")

# The closed-form gradient only involves the label embeddings, weighted by
# how far the target distribution is from the posterior.
g = vmfal_grad_z(z, S, M, tau)
num = finite_difference_gradient(lambda v: per_sample_soft_loss(v[None], S[None], M, tau)[0], z)
print("gradient rel. error vs finite differences:", f"{relative_error(g, num):.1e}")
print("zero when target = posterior:", np.abs(vmfal_grad_z(z, posterior(z, M, tau), M, tau)).max())

# The regularizer is 0 for orthonormal embeddings and 1/tau for collapsed ones.
print("r_ortho orthonormal:", r_ortho(np.eye(p)[:C], tau))
print("r_ortho collapsed:  ", r_ortho(np.tile(np.eye(p)[0], (C, 1)), tau))
print("r_ortho random:     ", round(r_ortho(M, tau), 4))
