"""Encoder, projection head, label embeddings and classifier with hand-written backprop.

Parameters live in a flat ``{name: ndarray}`` dict so that optimizers,
gradient checks and checkpoints can all iterate over the same keys:

* ``enc.W{i}``, ``enc.b{i}``  encoder affine layers (activation between them)
* ``proj.W``, ``proj.b``      linear projection d -> p
* ``M``                       label embeddings, C x p, unit rows
* ``cls.W{i}``, ``cls.b{i}``  classifier head d -> C
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDimension, MissingCheckpoint, NearZeroNorm, ShapeMismatch
from .numerics import NORM_EPS, l2_normalize

CHECKPOINT_SCHEMA = "vmfosr.checkpoint/1"

ENCODER = "enc."
PROJECTION = "proj."
EMBEDDINGS = "M"
CLASSIFIER = "cls."


@dataclass
class ModelConfig:
    input_dim: int = 32
    hidden_layers: list = field(default_factory=lambda: [64])
    d: int = 32
    p: int = 16
    C: int = 8
    activation: str = "tanh"
    tau: float = 0.1
    classifier_hidden: int = 0  # 0 -> single affine layer
    feature_activation: str = "identity"  # applied to the encoder output f

    def __post_init__(self):
        self.hidden_layers = [int(w) for w in self.hidden_layers]
        dims = [self.input_dim, self.d, self.p, self.C] + self.hidden_layers
        if min(dims) < 1:
            raise BadDimension("all model dimensions must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for act in (self.activation, self.feature_activation):
            if act not in _ACTIVATIONS:
                raise ValueError(f"activation must be one of {sorted(_ACTIVATIONS)}")

    @property
    def kappa(self):
        return 1.0 / self.tau


@dataclass
class ModelState:
    config: ModelConfig
    params: dict

    def copy(self):
        return ModelState(self.config, {k: v.copy() for k, v in self.params.items()})

    def block(self, prefix):
        return {k: v for k, v in self.params.items() if k.startswith(prefix)}


def _tanh_grad(h, out):
    return 1.0 - out**2


def _relu_grad(h, out):
    return (h > 0).astype(np.float64)


_ACTIVATIONS = {
    "tanh": (np.tanh, _tanh_grad),
    "relu": (lambda h: np.maximum(h, 0.0), _relu_grad),
    "identity": (lambda h: h, lambda h, out: np.ones_like(h)),
}


def _n_layers(params, prefix):
    return sum(1 for k in params if k.startswith(prefix + "W"))


def _mlp_forward(params, prefix, x, activation, last="identity"):
    act, _ = _ACTIVATIONS[activation]
    last_act, _ = _ACTIVATIONS[last]
    n = _n_layers(params, prefix)
    cache = []
    h = x
    for i in range(n):
        W, b = params[f"{prefix}W{i}"], params[f"{prefix}b{i}"]
        if h.shape[-1] != W.shape[0]:
            raise ShapeMismatch(f"{prefix}W{i} expects width {W.shape[0]}, got {h.shape[-1]}")
        pre = h @ W + b
        out = act(pre) if i < n - 1 else last_act(pre)
        cache.append((h, pre, out))
        h = out
    return h, cache


def _mlp_backward(params, prefix, cache, dout, activation, last="identity"):
    _, act_grad = _ACTIVATIONS[activation]
    _, last_grad = _ACTIVATIONS[last]
    n = len(cache)
    grads = {}
    g = dout
    for i in reversed(range(n)):
        h_in, pre, out = cache[i]
        g = g * (act_grad(pre, out) if i < n - 1 else last_grad(pre, out))
        grads[f"{prefix}W{i}"] = h_in.T @ g
        grads[f"{prefix}b{i}"] = g.sum(axis=0)
        g = g @ params[f"{prefix}W{i}"].T
    return grads, g


def _as_batch(x, width):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != width:
        raise ShapeMismatch(f"expected feature width {width}, got {x.shape[1]}")
    return x, single


def _he(rng, fan_in, fan_out):
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)


def init_label_embeddings(C, p, rng):
    """Kaiming-normal rows (variance 2/p) projected onto the unit sphere."""
    if C < 2 or p < 2:
        raise BadDimension(f"need C >= 2 and p >= 2, got C={C}, p={p}")
    return renormalize_embeddings(rng.standard_normal((C, p)) * np.sqrt(2.0 / p))


def renormalize_embeddings(M):
    """Rescale every row of ``M`` back to unit norm."""
    M = np.asarray(M, dtype=np.float64)
    if np.any(np.linalg.norm(M, axis=1) <= NORM_EPS):
        raise NearZeroNorm("label embedding row collapsed to zero")
    return l2_normalize(M, axis=1)


def init_model(config, rng):
    params = {}
    widths = [config.input_dim] + config.hidden_layers + [config.d]
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        params[f"enc.W{i}"] = _he(rng, a, b)
        params[f"enc.b{i}"] = np.zeros(b)
    params["proj.W"] = _he(rng, config.d, config.p)
    params["proj.b"] = np.zeros(config.p)
    params["M"] = init_label_embeddings(config.C, config.p, rng)
    head = [config.d] + ([config.classifier_hidden] if config.classifier_hidden else []) + [config.C]
    for i, (a, b) in enumerate(zip(head[:-1], head[1:])):
        params[f"cls.W{i}"] = _he(rng, a, b)
        params[f"cls.b{i}"] = np.zeros(b)
    return ModelState(config, params)


def encode(x, state, return_cache=False):
    """Encoder output ``f`` (unnormalized, width d) for one input or a batch."""
    x, single = _as_batch(x, state.config.input_dim)
    f, cache = _mlp_forward(state.params, ENCODER, x, state.config.activation,
                            state.config.feature_activation)
    f = f[0] if single else f
    return (f, cache) if return_cache else f


def encode_backward(state, cache, df):
    """Gradients of the encoder parameters and of the inputs, given dL/df."""
    return _mlp_backward(state.params, ENCODER, cache, np.atleast_2d(df),
                         state.config.activation, state.config.feature_activation)


def project_normalize(f, state, return_cache=False):
    """Linear projection to p dimensions followed by L2 normalization."""
    f, single = _as_batch(f, state.config.d)
    zt = f @ state.params["proj.W"] + state.params["proj.b"]
    norms = np.linalg.norm(zt, axis=1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise NearZeroNorm("projection output has near-zero norm")
    z = zt / norms
    out = z[0] if single else z
    return (out, (f, z, norms)) if return_cache else out


def project_normalize_backward(state, cache, dz):
    f, z, norms = cache
    dz = np.atleast_2d(dz)
    # d(zt/|zt|) = (I - z z^T) / |zt|
    dzt = (dz - z * np.sum(z * dz, axis=1, keepdims=True)) / norms
    grads = {"proj.W": f.T @ dzt, "proj.b": dzt.sum(axis=0)}
    return grads, dzt @ state.params["proj.W"].T


def classify(f, state, return_cache=False):
    """Raw logits of the classifier head on unnormalized features."""
    f, single = _as_batch(f, state.config.d)
    logits, cache = _mlp_forward(state.params, CLASSIFIER, f, state.config.activation)
    logits = logits[0] if single else logits
    return (logits, cache) if return_cache else logits


def classify_backward(state, cache, dlogits):
    return _mlp_backward(state.params, CLASSIFIER, cache, np.atleast_2d(dlogits),
                         state.config.activation)


def embed(x, state, return_cache=False):
    """Inputs -> normalized projections ``z``; the stage-one forward path."""
    f, enc_cache = encode(x, state, return_cache=True)
    z, proj_cache = project_normalize(f, state, return_cache=True)
    return (z, (enc_cache, proj_cache)) if return_cache else z


def embed_backward(state, cache, dz):
    enc_cache, proj_cache = cache
    grads, df = project_normalize_backward(state, proj_cache, dz)
    enc_grads, dx = encode_backward(state, enc_cache, df)
    grads.update(enc_grads)
    return grads, dx


def save_checkpoint(state, path, extra=None):
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "config": asdict(state.config),
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in state.params.items()},
    }
    if extra:
        payload["extra"] = extra
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(f"no checkpoint at {path}")
    payload = json.loads(path.read_text())
    if payload.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {payload.get('schema')!r}")
    config = ModelConfig(**payload["config"])
    params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
              for k, v in payload["params"].items()}
    return ModelState(config, params)
