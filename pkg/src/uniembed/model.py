"""Small feed-forward embedding network with exact manual backprop and Adam.

Architecture: affine layers with ReLU on hidden layers, then a final affine
projection followed by row-wise unit normalization. Desk-scale stand-in for a
pretrained backbone plus embedding head.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InputError, TrainingError
from .geometry import unit_normalize


@dataclass
class EmbeddingModel:
    weights: list  # W_l with shape (fan_in, fan_out)
    biases: list   # b_l with shape (fan_out,)
    activation: str = "relu"

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_model(widths, rng, activation: str = "relu") -> EmbeddingModel:
    """Gaussian init with std 1/sqrt(fan_in); biases zero."""
    if len(widths) < 2:
        raise InputError("widths must list at least input and output dims")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return EmbeddingModel(weights, biases, activation)


def copy_model(model: EmbeddingModel) -> EmbeddingModel:
    return EmbeddingModel(
        [w.copy() for w in model.weights],
        [b.copy() for b in model.biases],
        model.activation,
    )


def params_equal(a: EmbeddingModel, b: EmbeddingModel) -> bool:
    return all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights)) and all(
        np.array_equal(ba, bb) for ba, bb in zip(a.biases, b.biases)
    )


def forward(model: EmbeddingModel, x):
    """Embed rows of x; returns (unit-norm embeddings, cache for backward)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise InputError(f"input must be (n, {model.in_dim}), got {x.shape}")
    inputs = []
    h = x
    n_layers = len(model.weights)
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        h = h @ w + b
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    z = h
    norms = np.sqrt((z * z).sum(axis=1))
    if np.any(norms < 1e-30):
        raise DegenerateInputError("a row collapsed to zero before normalization")
    emb = z / norms[:, None]
    cache = (inputs, emb, norms)
    return emb, cache


def embed(model: EmbeddingModel, x) -> np.ndarray:
    return forward(model, x)[0]


def backward(model: EmbeddingModel, cache, grad_emb):
    """Exact parameter gradients for a matching forward call.

    The normalization layer maps z -> z/||z||; its Jacobian applied to the
    incoming gradient g is (g - (g . s) s) / ||z|| per row.
    """
    inputs, emb, norms = cache
    grad_emb = np.asarray(grad_emb, dtype=np.float64)
    if grad_emb.shape != emb.shape:
        raise InputError(f"grad must have shape {emb.shape}, got {grad_emb.shape}")
    radial = (grad_emb * emb).sum(axis=1, keepdims=True)
    dz = (grad_emb - radial * emb) / norms[:, None]

    n_layers = len(model.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        x_in = inputs[l]
        if l < n_layers - 1:
            # redo the cheap pre-activation to mask ReLU's dead units
            pre = x_in @ model.weights[l] + model.biases[l]
            dz = dz * (pre > 0.0)
        grad_w[l] = x_in.T @ dz
        grad_b[l] = dz.sum(axis=0)
        if l > 0:
            dz = dz @ model.weights[l].T
    return grad_w, grad_b


def init_adam(model: EmbeddingModel, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
        m=[np.zeros_like(w) for w in model.weights] + [np.zeros_like(b) for b in model.biases],
        v=[np.zeros_like(w) for w in model.weights] + [np.zeros_like(b) for b in model.biases],
    )


def adam_step(model: EmbeddingModel, grads, state: AdamState) -> None:
    """One bias-corrected Adam update, in place."""
    grad_w, grad_b = grads
    flat_grads = list(grad_w) + list(grad_b)
    flat_params = list(model.weights) + list(model.biases)
    for g in flat_grads:
        if not np.all(np.isfinite(g)):
            raise TrainingError(
                "non-finite gradient at step %d (|g|_max=%s)"
                % (state.step, np.abs(g).max())
            )
    state.step += 1
    b1t = 1.0 - state.beta1 ** state.step
    b2t = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(flat_params, flat_grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)


def save_model(model: EmbeddingModel, path, meta: dict | None = None) -> None:
    """Write a JSON checkpoint; floats round-trip exactly (17 significant digits)."""
    doc = {
        "schema": "uniembed-model v1",
        "widths": model.widths,
        "activation": model.activation,
        "layers": [
            {"w": [[float(x) for x in row] for row in w], "b": [float(x) for x in b]}
            for w, b in zip(model.weights, model.biases)
        ],
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True)
        f.write("\n")


def load_model(path):
    """Read a checkpoint; returns (model, meta)."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("schema") != "uniembed-model v1":
        raise InputError(f"{path}: not a model checkpoint")
    weights = [np.asarray(layer["w"], dtype=np.float64) for layer in doc["layers"]]
    biases = [np.asarray(layer["b"], dtype=np.float64) for layer in doc["layers"]]
    model = EmbeddingModel(weights, biases, doc.get("activation", "relu"))
    if model.widths != list(doc["widths"]):
        raise InputError(f"{path}: layer shapes disagree with declared widths")
    return model, doc.get("meta", {})
