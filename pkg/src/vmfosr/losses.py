"""vMF alignment losses, their gradients, and the orthogonality regularizer.

Everything here takes already-normalized projections ``Z`` (rows on the unit
sphere) and unit-row label embeddings ``M``. The class posterior is a
temperature softmax over the cosine similarities ``Z @ M.T``; the vMF
normalizer is shared by every class and cancels, so it never appears.
"""
import numpy as np

from .errors import BadIndex, EmptyInput, ShapeMismatch, SingleClass, ZeroRow
from .numerics import log_softmax, log_sum_exp, softmax


class SimilarityCounter:
    """Counts sample/label-embedding dot products; one loss call costs B*C."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0


def similarities(Z, M, counter=None):
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    M = np.asarray(M, dtype=np.float64)
    if Z.shape[1] != M.shape[1]:
        raise ShapeMismatch(f"projection width {Z.shape[1]} != embedding width {M.shape[1]}")
    if counter is not None:
        counter.count += Z.shape[0] * M.shape[0]
    return Z @ M.T


def posterior(z, M, tau):
    """Class posterior ``P(c | z)`` under one vMF component per class."""
    z = np.asarray(z, dtype=np.float64)
    P = softmax(similarities(z, M), tau)
    return P[0] if z.ndim == 1 else P


def label_similarity(soft_labels):
    """Row-normalize soft labels: ``S_ik = y_ik / sum_j y_ij``."""
    y = np.atleast_2d(np.asarray(soft_labels, dtype=np.float64))
    if np.any(y < 0):
        raise ValueError("soft labels must be nonnegative")
    sums = y.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ZeroRow("soft-label row sums to zero")
    return y / sums


def _check(Z, S, M):
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if Z.shape[0] == 0:
        raise EmptyInput("empty batch")
    if S.shape != (Z.shape[0], M.shape[0]):
        raise ShapeMismatch(f"S has shape {S.shape}, expected {(Z.shape[0], M.shape[0])}")
    return Z, S


def per_sample_soft_loss(Z, S, M, tau, counter=None):
    """``-sum_k S_ik log P_ik`` for every row."""
    Z, S = _check(Z, S, M)
    logP = log_softmax(similarities(Z, M, counter), tau)
    return -np.sum(S * logP, axis=1)


def vmfal_soft(Z, S, M, tau, counter=None):
    """Soft vMF alignment loss, the batch mean of :func:`per_sample_soft_loss`."""
    return float(np.mean(per_sample_soft_loss(Z, S, M, tau, counter)))


def vmfal_hard(Z, targets, M, tau, counter=None):
    """Negative mean log posterior of each sample's target class."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    targets = np.asarray(targets)
    if Z.shape[0] == 0:
        raise EmptyInput("empty batch")
    C = M.shape[0]
    if targets.shape != (Z.shape[0],) or targets.min() < 0 or targets.max() >= C:
        raise BadIndex("targets must be class indices in [0, C)")
    logP = log_softmax(similarities(Z, M, counter), tau)
    return float(-np.mean(logP[np.arange(Z.shape[0]), targets]))


def vmfal_grad_z(z, S_i, M, tau):
    """Gradient of the per-sample soft loss wrt the normalized projection z.

    ``-sum_k (S_ik - P_ik) mu_k / tau``. Assumes ``S_i`` sums to one.
    """
    P = posterior(z, M, tau)
    return -((np.asarray(S_i, dtype=np.float64) - P) @ M) / tau


def vmfal_soft_grads(Z, S, M, tau):
    """Loss value and gradients of the batch-mean soft loss wrt ``Z`` and ``M``."""
    Z, S = _check(Z, S, M)
    n = Z.shape[0]
    logits = similarities(Z, M) / tau
    logP = logits - log_sum_exp(logits, axis=1)[:, None]
    loss = float(-np.sum(S * logP) / n)
    # dL/dlogits = (P * rowsum(S) - S) / n; rowsum(S) = 1 for similarity rows,
    # but keeping it makes the gradient exact for any nonnegative weights
    G = (np.exp(logP) * S.sum(axis=1, keepdims=True) - S) / (n * tau)
    return loss, G @ M, G.T @ Z


def decompose_alignment_uniformity(z, S_i, M, tau):
    """Split the per-sample soft loss into alignment and uniformity terms.

    alignment = -(1/tau) sum_k S_ik (z . mu_k)
    uniformity = log sum_k exp(z . mu_k / tau)
    """
    sims = similarities(z, M)[0]
    S_i = np.asarray(S_i, dtype=np.float64)
    alignment = -float(S_i @ sims) / tau
    uniformity = float(log_sum_exp(sims / tau))
    return alignment, uniformity


def r_ortho(M, tau):
    """Orthogonality regularizer on the label embeddings.

    Log of the mean, over ordered pairs i != j, of ``exp((mu_i . mu_j)^2 / tau)``.
    Zero for orthonormal rows, ``1/tau`` when every row is identical.
    """
    return r_ortho_grad(M, tau)[0]


def r_ortho_grad(M, tau):
    M = np.asarray(M, dtype=np.float64)
    C = M.shape[0]
    if C < 2:
        raise SingleClass("the regularizer needs at least two label embeddings")
    G = M @ M.T
    off = ~np.eye(C, dtype=bool)
    vals = G[off] ** 2 / tau
    # log-mean-exp around the max: exact at both boundaries (all vals equal)
    top = vals.max()
    value = float(top + np.log(np.mean(np.exp(vals - top))))
    W = np.zeros_like(G)
    W[off] = softmax(vals)  # d value / d vals
    dG = W * 2.0 * G / tau
    return value, (dG + dG.T) @ M


def total_loss(Z, S, M, tau, use_r_ortho=True, counter=None):
    loss = vmfal_soft(Z, S, M, tau, counter)
    return loss + r_ortho(M, tau) if use_r_ortho else loss


def total_loss_grads(Z, S, M, tau, use_r_ortho=True):
    """Value plus gradients wrt ``Z`` and ``M`` of soft loss (+ regularizer)."""
    loss, dZ, dM = vmfal_soft_grads(Z, S, M, tau)
    if use_r_ortho:
        reg, dM_reg = r_ortho_grad(M, tau)
        loss += reg
        dM = dM + dM_reg
    return loss, dZ, dM
