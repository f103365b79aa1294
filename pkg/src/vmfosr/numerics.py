"""Numerical primitives shared by every other module.

All randomness goes through :func:`seeded_rng`, which returns a numpy
``Generator`` driven by the counter-based Philox bit generator. Philox is a
fixed, documented algorithm, so a ``(seed, stream)`` pair produces the same
draws on every platform.
"""
import numpy as np

from .errors import (
    BadDimension,
    EmptyInput,
    NearZeroNorm,
    NonFiniteEvaluation,
    NonPositiveTemperature,
)

NORM_EPS = 1e-12


def seeded_rng(seed, stream=0):
    """Return a deterministic generator for ``(seed, stream)``.

    Distinct stream ids give statistically independent sequences, so workers
    (or per-class samplers) can each own one without sharing state.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    key = np.random.SeedSequence([int(seed), int(stream)])
    return np.random.Generator(np.random.Philox(key))


def l2_normalize(v, axis=-1):
    """Scale ``v`` (or each slice along ``axis``) to unit Euclidean norm."""
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise NearZeroNorm("cannot normalize a vector with norm <= 1e-12")
    return v / norms


def log_sum_exp(values, axis=-1):
    """Stable ``log(sum(exp(values)))`` along ``axis``."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or values.shape[axis] == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    m = np.max(values, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(values - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def softmax(values, tau=1.0, axis=-1):
    """Temperature-scaled softmax, ``exp(v/tau) / sum(exp(v/tau))``."""
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    scaled = np.asarray(values, dtype=np.float64) / tau
    if scaled.size == 0:
        raise EmptyInput("softmax of an empty vector")
    shifted = scaled - np.max(scaled, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(values, tau=1.0, axis=-1):
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    scaled = np.asarray(values, dtype=np.float64) / tau
    return scaled - np.expand_dims(log_sum_exp(scaled, axis=axis), axis)


def sample_uniform_sphere(p, rng, size=None):
    """Uniform draw(s) on the unit sphere in R^p (normalized isotropic Gaussian)."""
    if p < 2:
        raise BadDimension(f"sphere dimension must be >= 2, got {p}")
    shape = (p,) if size is None else (size, p)
    while True:
        g = rng.standard_normal(shape)
        if np.all(np.linalg.norm(g, axis=-1) > NORM_EPS):
            return l2_normalize(g)


def _wood_cosines(kappa, p, n, rng):
    """Draw ``n`` cosines w = mu.x from the vMF marginal by Wood's rejection scheme."""
    m = p - 1
    # b = (-2k + sqrt(4k^2 + m^2)) / m, rewritten to avoid cancellation at large k
    b = m / (np.sqrt(4.0 * kappa**2 + m**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * np.log(1.0 - x0**2)

    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        z = rng.beta(m / 2.0, m / 2.0, size=need)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=need)
        ok = kappa * w + m * np.log(1.0 - x0 * w) - c >= np.log(u)
        k = int(ok.sum())
        out[filled:filled + k] = w[ok]
        filled += k
    return out


def sample_vmf(mu, kappa, rng, size=None):
    """Sample from vMF(mu, kappa) on the unit sphere.

    The cosine to ``mu`` is drawn with Wood's rejection sampler and combined
    with a uniform tangent direction, so the normalizing constant is never
    needed. ``kappa=0`` reduces to the uniform distribution.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if abs(np.linalg.norm(mu) - 1.0) > 1e-9:
        raise ValueError("mu must be a unit vector")
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    p = mu.shape[0]
    if p < 2:
        raise BadDimension(f"sphere dimension must be >= 2, got {p}")
    n = 1 if size is None else size

    w = _wood_cosines(float(kappa), p, n, rng)
    v = rng.standard_normal((n, p))
    v -= np.outer(v @ mu, mu)
    v = l2_normalize(v)
    x = w[:, None] * mu[None, :] + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * v
    # remove the last ulp of drift so the unit-norm invariant holds tightly
    x = l2_normalize(x)
    return x[0] if size is None else x


def finite_difference_gradient(f, x, h=1e-6):
    """Central-difference gradient of scalar ``f`` at ``x`` (any array shape)."""
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"step h must lie in [1e-7, 1e-3], got {h}")
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f(x)
        flat_x[i] = orig - h
        fm = f(x)
        flat_x[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(f"f is not finite around coordinate {i}")
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b, floor=1e-12):
    """``||a-b|| / max(||a||, ||b||, floor)``; the gradient-check metric."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)
