"""Two-stage training: spherical representation learning, then a frozen-feature classifier."""
import math
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentConfig, SoftLabeledBatch, build_unified_batch, jitter, one_hot, smooth_labels
from .errors import NonFiniteLoss, ShapeMismatch, SplitLeak
from .losses import label_similarity, total_loss_grads
from .model import (
    CLASSIFIER,
    EMBEDDINGS,
    classify,
    classify_backward,
    embed,
    embed_backward,
    encode,
    init_model,
    renormalize_embeddings,
)
from .numerics import log_softmax, softmax


@dataclass
class TrainConfig:
    epochs_stage1: int = 200
    epochs_stage2: int = 100
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    lr_schedule: str = "cosine"
    weight_decay: float = 5e-4
    r_ortho_enabled: bool = True
    stage2_reencode: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs_stage1 < 0 or self.epochs_stage2 < 0 or self.batch_size < 1:
            raise ValueError("epoch counts must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError("lr_schedule must be 'constant' or 'cosine'")


@dataclass
class FeatureBank:
    """Unnormalized encoder features of the training split."""

    features: np.ndarray
    labels: np.ndarray
    inputs: np.ndarray = field(default=None, repr=False)
    source: str = ""

    def __len__(self):
        return self.features.shape[0]


def _guard_train_split(data):
    if data.role != "train" or not np.all(data.known):
        raise SplitLeak("training may only read known-class samples of the train split")


def learning_rate_at(cfg, epoch, n_epochs):
    if cfg.lr_schedule == "constant" or n_epochs <= 1:
        return cfg.learning_rate
    return 0.5 * cfg.learning_rate * (1.0 + math.cos(math.pi * epoch / n_epochs))


class SGD:
    """Momentum SGD with decoupled-from-bias L2 weight decay on weight matrices."""

    def __init__(self, momentum, weight_decay=0.0):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {}

    def step(self, params, grads, lr):
        for name, g in grads.items():
            if self.weight_decay and ".W" in name:
                g = g + self.weight_decay * params[name]
            v = self.velocity.get(name)
            v = g if v is None else self.momentum * v + g
            self.velocity[name] = v
            params[name] = params[name] - lr * v


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def stage_one_step(state, inputs, labels, aug, rng, use_r_ortho=True):
    """Loss and parameter gradients for one mini-batch (no parameter update)."""
    C, tau = state.config.C, state.config.tau
    x = jitter(inputs, aug.jitter_std, rng)
    y = smooth_labels(labels, C, aug.sigma) if aug.ls_enabled else one_hot(labels, C)
    unified = build_unified_batch(SoftLabeledBatch(x, y), aug, rng)
    Z, cache = embed(unified.inputs, state, return_cache=True)
    S = label_similarity(unified.soft_labels)
    loss, dZ, dM = total_loss_grads(Z, S, state.params[EMBEDDINGS], tau, use_r_ortho)
    grads, _ = embed_backward(state, cache, dZ)
    grads[EMBEDDINGS] = dM
    return loss, grads


def train_stage_one(data, model_cfg, train_cfg, rng, augment_cfg=None, state=None):
    """Representation learning on normalized projections.

    Returns ``(state, history)``; ``history`` holds the per-epoch mean loss
    and the per-epoch worst deviation of label-embedding row norms from one.
    """
    _guard_train_split(data)
    aug = augment_cfg or AugmentConfig()
    if state is None:
        state = init_model(model_cfg, rng)
    else:
        state = state.copy()
    if data.inputs.shape[1] != model_cfg.input_dim:
        raise ShapeMismatch("dataset width does not match model input_dim")
    opt = SGD(train_cfg.momentum, train_cfg.weight_decay)
    history = {"loss": [], "embedding_norm_dev": []}
    trainable = [k for k in state.params if not k.startswith(CLASSIFIER)]

    for epoch in range(train_cfg.epochs_stage1):
        lr = learning_rate_at(train_cfg, epoch, train_cfg.epochs_stage1)
        losses = []
        for b, idx in enumerate(_batches(len(data), train_cfg.batch_size, rng)):
            loss, grads = stage_one_step(state, data.inputs[idx], data.labels[idx], aug, rng,
                                         train_cfg.r_ortho_enabled)
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite stage-one loss at epoch {epoch}, batch {b}",
                    {"epoch": epoch, "batch": b, "indices": idx.tolist(), "loss": loss})
            opt.step(state.params, {k: grads[k] for k in trainable}, lr)
            state.params[EMBEDDINGS] = renormalize_embeddings(state.params[EMBEDDINGS])
            losses.append(loss)
        history["loss"].append(float(np.mean(losses)))
        norms = np.linalg.norm(state.params[EMBEDDINGS], axis=1)
        history["embedding_norm_dev"].append(float(np.max(np.abs(norms - 1.0))))
    return state, history


def extract_features(state, data, source=""):
    """Encoder outputs of the train split, without normalization."""
    _guard_train_split(data)
    return FeatureBank(encode(data.inputs, state), data.labels.copy(), data.inputs.copy(), source)


def cross_entropy(logits, label):
    """``-sum_k y_k log softmax(logits)_k``; ``label`` is an index or a probability vector.

    Batched inputs return the mean over rows.
    """
    logits = np.asarray(logits, dtype=np.float64)
    C = logits.shape[-1]
    label = np.asarray(label)
    if label.dtype.kind in "iu":
        y = one_hot(np.atleast_1d(label), C)
    else:
        y = np.atleast_2d(label.astype(np.float64))
    logits2 = np.atleast_2d(logits)
    if y.shape != logits2.shape:
        raise ShapeMismatch(f"label shape {y.shape} != logits shape {logits2.shape}")
    return float(np.mean(-np.sum(y * log_softmax(logits2), axis=1)))


def cross_entropy_grad(logits, labels):
    """Mean cross-entropy and its gradient wrt batched logits, integer labels."""
    n = logits.shape[0]
    y = one_hot(labels, logits.shape[1])
    loss = float(np.mean(-np.sum(y * log_softmax(logits), axis=1)))
    return loss, (softmax(logits) - y) / n


def train_stage_two(bank, state, train_cfg, rng, augment_cfg=None):
    """Fit the classifier head with cross-entropy; encoder and everything else frozen.

    With ``train_cfg.stage2_reencode`` the bank inputs are re-jittered and
    re-encoded every epoch; otherwise the stored features are reused.
    Returns ``(state, history)`` with per-epoch loss and bank accuracy.
    """
    aug = augment_cfg or AugmentConfig()
    state = state.copy()
    opt = SGD(train_cfg.momentum, train_cfg.weight_decay)
    reencode = train_cfg.stage2_reencode and bank.inputs is not None
    history = {"loss": [], "accuracy": []}
    for epoch in range(train_cfg.epochs_stage2):
        lr = learning_rate_at(train_cfg, epoch, train_cfg.epochs_stage2)
        feats = encode(jitter(bank.inputs, aug.jitter_std, rng), state) if reencode else bank.features
        losses = []
        for idx in _batches(len(bank), train_cfg.batch_size, rng):
            logits, cache = classify(feats[idx], state, return_cache=True)
            loss, dlogits = cross_entropy_grad(logits, bank.labels[idx])
            grads, _ = classify_backward(state, cache, dlogits)
            opt.step(state.params, grads, lr)
            losses.append(loss)
        history["loss"].append(float(np.mean(losses)))
        pred = np.argmax(classify(bank.features, state), axis=1)
        history["accuracy"].append(float(np.mean(pred == bank.labels)))
    return state, history
