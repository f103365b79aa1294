"""Finite-difference audit of every analytic gradient in the package."""
import itertools

import numpy as np

from .augment import AugmentConfig, one_hot
from .errors import GradCheckFailure
from .losses import (
    label_similarity,
    per_sample_soft_loss,
    r_ortho,
    r_ortho_grad,
    total_loss,
    vmfal_grad_z,
    vmfal_soft,
    vmfal_soft_grads,
)
from .model import ModelConfig, ModelState, classify, classify_backward, embed, init_model
from .numerics import finite_difference_gradient, l2_normalize, relative_error, seeded_rng, softmax
from .training import cross_entropy, stage_one_step

TOLERANCE = 1e-5


def random_unit_rows(rng, n, p):
    return l2_normalize(rng.standard_normal((n, p)))


def random_soft_labels(rng, n, C):
    return label_similarity(rng.uniform(size=(n, C)) ** 3 + 1e-3)


def per_sample_gradient_errors(n_instances, rng, grad_fn=vmfal_grad_z,
                            ps=(4, 16), Cs=(3, 10), taus=(0.1, 1.0)):
    """Relative errors of ``grad_fn`` against central differences of the per-sample loss."""
    grid = list(itertools.product(ps, Cs, taus))
    errors = []
    for i in range(n_instances):
        p, C, tau = grid[i % len(grid)]
        z = random_unit_rows(rng, 1, p)[0]
        M = random_unit_rows(rng, C, p)
        S = random_soft_labels(rng, 1, C)
        f = lambda v: float(per_sample_soft_loss(v[None], S, M, tau)[0])
        num = finite_difference_gradient(f, z)
        errors.append(relative_error(grad_fn(z, S[0], M, tau), num))
    return np.array(errors)


def _with_param(state, name, value):
    params = dict(state.params)
    params[name] = value
    return ModelState(state.config, params)


def model_block_errors(rng, config=None):
    """Worst relative error per parameter block of the stage-one and stage-two objectives."""
    config = config or ModelConfig(input_dim=6, hidden_layers=[8, 7], d=5, p=4, C=3, tau=0.5,
                                   classifier_hidden=6)
    state = init_model(config, rng)
    x = rng.standard_normal((6, config.input_dim))
    y = rng.integers(0, config.C, 6)
    sigma = 0.1
    aug = AugmentConfig(sigma=sigma, jitter_std=0.0, mixup_enabled=False)
    _, grads = stage_one_step(state, x, y, aug, rng)
    S = label_similarity(np.where(one_hot(y, config.C) > 0, 1 - sigma, sigma / (config.C - 1)))
    errors = {}
    for name, g in grads.items():
        def loss(v, name=name):
            s = _with_param(state, name, v)
            return total_loss(embed(x, s), S, s.params["M"], config.tau)
        errors[name] = relative_error(g, finite_difference_gradient(loss, state.params[name]))

    f = rng.standard_normal((5, config.d))
    labels = rng.integers(0, config.C, 5)
    logits, cache = classify(f, state, return_cache=True)
    cls_grads, _ = classify_backward(state, cache, (softmax(logits) - one_hot(labels, config.C)) / 5)
    for name, g in cls_grads.items():
        loss = lambda v, name=name: cross_entropy(classify(f, _with_param(state, name, v)), labels)
        errors[name] = relative_error(g, finite_difference_gradient(loss, state.params[name]))
    return errors


def loss_block_errors(rng):
    Z, M = random_unit_rows(rng, 4, 5), random_unit_rows(rng, 3, 5)
    S = random_soft_labels(rng, 4, 3)
    tau = 0.3
    _, dZ, dM = vmfal_soft_grads(Z, S, M, tau)
    _, dR = r_ortho_grad(M, tau)
    return {
        "vmfal_soft.Z": relative_error(dZ, finite_difference_gradient(lambda v: vmfal_soft(v, S, M, tau), Z)),
        "vmfal_soft.M": relative_error(dM, finite_difference_gradient(lambda v: vmfal_soft(Z, S, v, tau), M)),
        "r_ortho.M": relative_error(dR, finite_difference_gradient(lambda v: r_ortho(v, tau), M)),
    }


def run_gradcheck(seed=0, n_instances=40, grad_fn=vmfal_grad_z, tolerance=TOLERANCE):
    """Audit all gradients; returns a report dict, raises GradCheckFailure on any miss.

    ``grad_fn`` replaces the per-sample loss gradient, which lets a test
    plant a deliberately wrong formula and watch the audit catch it.
    """
    rng = seeded_rng(seed)
    per_sample = per_sample_gradient_errors(n_instances, rng, grad_fn)
    blocks = {"vmfal_grad_z": float(per_sample.max())}
    blocks.update(loss_block_errors(rng))
    blocks.update(model_block_errors(rng))
    blocks = {k: float(v) for k, v in blocks.items()}
    failing = sorted(k for k, v in blocks.items() if not v <= tolerance)
    report = {"seed": seed, "tolerance": tolerance, "n_instances": n_instances,
              "worst_relative_error": blocks, "failing_blocks": failing,
              "passed": not failing}
    if failing:
        worst = max(failing, key=blocks.get)
        raise GradCheckFailure(
            f"{len(failing)} gradient block(s) exceed {tolerance:g}; worst {worst} = {blocks[worst]:.3e}",
            report)
    return report
