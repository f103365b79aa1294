"""Stage-one augmentation: input jitter, label smoothing, Mixup, unified batch."""
from dataclasses import dataclass

import numpy as np

from .errors import BadIndex, EmptyInput, InvalidSigma, ShapeMismatch


@dataclass
class AugmentConfig:
    sigma: float = 0.1
    jitter_std: float = 0.05
    mixup_enabled: bool = True
    ls_enabled: bool = True
    beta_params: tuple = (1.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise InvalidSigma(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be nonnegative")
        self.beta_params = tuple(float(b) for b in self.beta_params)
        if len(self.beta_params) != 2 or min(self.beta_params) <= 0:
            raise ValueError("beta_params must be two positive reals")


@dataclass
class SoftLabeledBatch:
    inputs: np.ndarray
    soft_labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.soft_labels = np.asarray(self.soft_labels, dtype=np.float64)
        if self.inputs.shape[0] != self.soft_labels.shape[0]:
            raise ShapeMismatch("inputs and soft labels disagree in batch size")

    def __len__(self):
        return self.inputs.shape[0]


def label_smooth(class_index, C, sigma):
    """Smoothed target: ``1 - sigma`` on the true class, ``sigma/(C-1)`` elsewhere."""
    if not 0.0 <= sigma < 1.0:
        raise InvalidSigma(f"sigma must lie in [0, 1), got {sigma}")
    if C < 2:
        raise BadIndex("need at least two classes")
    if not 0 <= class_index < C:
        raise BadIndex(f"class index {class_index} out of range for C={C}")
    y = np.full(C, sigma / (C - 1))
    y[class_index] = 1.0 - sigma
    return y


def smooth_labels(labels, C, sigma):
    """Batched :func:`label_smooth` over an integer label vector."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise BadIndex("label outside [0, C)")
    if not 0.0 <= sigma < 1.0:
        raise InvalidSigma(f"sigma must lie in [0, 1), got {sigma}")
    y = np.full((labels.shape[0], C), sigma / (C - 1))
    y[np.arange(labels.shape[0]), labels] = 1.0 - sigma
    return y


def one_hot(labels, C):
    return smooth_labels(labels, C, 0.0)


def jitter(inputs, std, rng):
    """Isotropic Gaussian input noise; the desk-scale stand-in for image augmentation."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if std == 0:
        return inputs.copy()
    return inputs + std * rng.standard_normal(inputs.shape)


def mixup_pair(x_i, y_i, x_j, y_j, lam):
    """Convex combination of two samples and their soft labels with weight ``lam``."""
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if x_i.shape != x_j.shape or y_i.shape != y_j.shape:
        raise ShapeMismatch("mixup operands must share shapes")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return x_i.copy(), y_i.copy()
    if lam == 0.0:
        return x_j.copy(), y_j.copy()
    return lam * x_i + (1.0 - lam) * x_j, lam * y_i + (1.0 - lam) * y_j


def build_unified_batch(batch, config, rng):
    """Append one Mixup sample per original, giving a batch of size 2N.

    ``batch`` is expected to be already jittered and smoothed. Partners come
    from a random permutation of the batch and each pair draws its own
    lambda from Beta(a, b) (uniform for the default (1, 1)).
    """
    n = len(batch)
    if n == 0:
        raise EmptyInput("cannot augment an empty batch")
    if not config.mixup_enabled:
        return SoftLabeledBatch(batch.inputs.copy(), batch.soft_labels.copy())
    partner = rng.permutation(n)
    a, b = config.beta_params
    lam = rng.uniform(size=n) if (a, b) == (1.0, 1.0) else rng.beta(a, b, size=n)
    mixed_x = lam[:, None] * batch.inputs + (1.0 - lam[:, None]) * batch.inputs[partner]
    mixed_y = lam[:, None] * batch.soft_labels + (1.0 - lam[:, None]) * batch.soft_labels[partner]
    return SoftLabeledBatch(np.vstack([batch.inputs, mixed_x]),
                            np.vstack([batch.soft_labels, mixed_y]))
