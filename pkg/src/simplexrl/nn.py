"""Minimal feed-forward network engine: forward, exact backprop, Adam.

Supports fixed MLP topologies with leaky-ReLU / tanh / identity
activations and three output heads:

* ``dirichlet``: elementwise 1 + softplus, so outputs are valid
  concentration parameters (all >= 1);
* ``gaussian_softmax``: first half of the outputs are means, second half
  are log-scales clamped to [-20, 2];
* ``scalar``: identity, for Q-values.

Single inputs of shape (d,) and minibatches of shape (B, d) are both
accepted; minibatch parameter gradients are the mean over the batch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .special_math import softplus_plus_one

__all__ = [
    "ActivationTape",
    "HEAD_KINDS",
    "LayerSpec",
    "NetworkParams",
    "ParamGrads",
    "adam_step",
    "backward",
    "clone_params",
    "forward",
    "init_network",
    "load_network",
    "save_network",
]

LEAKY_SLOPE = 0.01
LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0

ACTIVATIONS = ("leaky_relu", "tanh", "identity")
HEAD_KINDS = ("dirichlet", "gaussian_softmax", "scalar")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_MAGIC = b"SPXRLNET"
_FORMAT_VERSION = 1


@dataclass
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "identity"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class NetworkParams:
    specs: list[LayerSpec]
    head: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray] = field(repr=False, default_factory=list)
    v_w: list[np.ndarray] = field(repr=False, default_factory=list)
    m_b: list[np.ndarray] = field(repr=False, default_factory=list)
    v_b: list[np.ndarray] = field(repr=False, default_factory=list)
    step_count: int = 0

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim


@dataclass
class ActivationTape:
    """Per-layer inputs and pre-activations cached by forward."""

    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    head_pre: np.ndarray
    batched: bool


@dataclass
class ParamGrads:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


def init_network(specs: list[LayerSpec], head: str, seed: int) -> NetworkParams:
    """Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases."""
    if not specs:
        raise ValueError("need at least one layer")
    for prev, nxt in zip(specs, specs[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ValueError(
                f"layer dims mismatch: {prev.out_dim} -> {nxt.in_dim}"
            )
    if head not in HEAD_KINDS:
        raise ValueError(f"unknown head {head!r}")
    if head == "gaussian_softmax" and specs[-1].out_dim % 2 != 0:
        raise ValueError("gaussian_softmax head needs an even output width")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in specs:
        std = np.sqrt(2.0 / spec.in_dim)
        weights.append(rng.normal(0.0, std, size=(spec.in_dim, spec.out_dim)))
        biases.append(np.zeros(spec.out_dim))
    params = NetworkParams(specs=list(specs), head=head, weights=weights, biases=biases)
    _reset_adam(params)
    return params


def _reset_adam(params: NetworkParams) -> None:
    params.m_w = [np.zeros_like(w) for w in params.weights]
    params.v_w = [np.zeros_like(w) for w in params.weights]
    params.m_b = [np.zeros_like(b) for b in params.biases]
    params.v_b = [np.zeros_like(b) for b in params.biases]
    params.step_count = 0


def clone_params(params: NetworkParams) -> NetworkParams:
    """Deep copy including optimizer state."""
    out = NetworkParams(
        specs=list(params.specs),
        head=params.head,
        weights=[w.copy() for w in params.weights],
        biases=[b.copy() for b in params.biases],
        m_w=[m.copy() for m in params.m_w],
        v_w=[v.copy() for v in params.v_w],
        m_b=[m.copy() for m in params.m_b],
        v_b=[v.copy() for v in params.v_b],
        step_count=params.step_count,
    )
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def _apply_head(z: np.ndarray, head: str) -> np.ndarray:
    if head == "scalar":
        return z
    if head == "dirichlet":
        return softplus_plus_one(z)
    k = z.shape[-1] // 2
    mu = z[..., :k]
    log_sigma = np.clip(z[..., k:], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    return np.concatenate([mu, log_sigma], axis=-1)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _head_grad(z: np.ndarray, head: str, d_out: np.ndarray) -> np.ndarray:
    if head == "scalar":
        return d_out
    if head == "dirichlet":
        # d/dz softplus(z) = sigmoid(z)
        return d_out * _stable_sigmoid(z)
    k = z.shape[-1] // 2
    inside = (z[..., k:] > LOG_SIGMA_MIN) & (z[..., k:] < LOG_SIGMA_MAX)
    gate = np.concatenate([np.ones_like(z[..., :k]), inside.astype(float)], axis=-1)
    return d_out * gate


def forward(params: NetworkParams, x) -> tuple[np.ndarray, ActivationTape]:
    """Run the network; returns the head output and the backprop tape."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("forward requires finite input")
    batched = x.ndim == 2
    h = x if batched else x[None, :]
    if h.shape[1] != params.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != network dim {params.in_dim}")
    inputs, pre_acts = [], []
    for spec, w, b in zip(params.specs, params.weights, params.biases):
        inputs.append(h)
        z = h @ w + b
        pre_acts.append(z)
        h = _activate(z, spec.activation)
    out = _apply_head(h, params.head)
    tape = ActivationTape(inputs=inputs, pre_activations=pre_acts, head_pre=h, batched=batched)
    return (out if batched else out[0]), tape


def backward(params: NetworkParams, tape: ActivationTape, output_grad) -> ParamGrads:
    """Exact reverse-mode gradients.

    ``output_grad`` holds d(loss_b)/d(output_b) per sample; the returned
    parameter gradients are the gradient of the batch-mean loss.
    """
    g = np.asarray(output_grad, dtype=float)
    if not tape.batched:
        g = g[None, :]
    if g.shape != tape.head_pre.shape:
        raise ValueError(
            f"output_grad shape {g.shape} != output shape {tape.head_pre.shape}"
        )
    batch = g.shape[0]
    g = _head_grad(tape.head_pre, params.head, g)
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        spec = params.specs[i]
        delta = g * _activate_grad(tape.pre_activations[i], spec.activation)
        d_weights[i] = tape.inputs[i].T @ delta / batch
        d_biases[i] = delta.mean(axis=0)
        if i > 0:
            g = delta @ params.weights[i].T
    return ParamGrads(d_weights=d_weights, d_biases=d_biases)


def adam_step(params: NetworkParams, grads: ParamGrads, lr: float) -> NetworkParams:
    """One Adam update (beta1=0.9, beta2=0.999, eps=1e-8), in place."""
    for g in grads.d_weights + grads.d_biases:
        if not np.all(np.isfinite(g)):
            raise ValueError("refusing Adam step on non-finite gradients")
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for w, g, m, v in zip(params.weights, grads.d_weights, params.m_w, params.v_w):
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * g * g
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    for b, g, m, v in zip(params.biases, grads.d_biases, params.m_b, params.v_b):
        m *= ADAM_BETA1
        m += (1 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1 - ADAM_BETA2) * g * g
        b -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return params


# ---------------------------------------------------------------------------
# Checkpoint format: 8-byte magic, version, head, then per layer the
# dimensions, activation and raw little-endian float64 arrays. Round-trips
# bit-exactly. Optimizer state is not part of a checkpoint.
# ---------------------------------------------------------------------------

_ACT_CODES = {name: i for i, name in enumerate(ACTIVATIONS)}
_HEAD_CODES = {name: i for i, name in enumerate(HEAD_KINDS)}


def save_network(params: NetworkParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IBI", _FORMAT_VERSION, _HEAD_CODES[params.head], len(params.specs)))
        for spec, w, b in zip(params.specs, params.weights, params.biases):
            fh.write(struct.pack("<IIB", spec.in_dim, spec.out_dim, _ACT_CODES[spec.activation]))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path) -> NetworkParams:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not a network checkpoint (magic {magic!r})")
        version, head_code, n_layers = struct.unpack("<IBI", fh.read(9))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        head = HEAD_KINDS[head_code]
        specs, weights, biases = [], [], []
        for _ in range(n_layers):
            in_dim, out_dim, act_code = struct.unpack("<IIB", fh.read(9))
            specs.append(LayerSpec(in_dim, out_dim, ACTIVATIONS[act_code]))
            w = np.frombuffer(fh.read(8 * in_dim * out_dim), dtype="<f8")
            weights.append(w.reshape(in_dim, out_dim).copy())
            biases.append(np.frombuffer(fh.read(8 * out_dim), dtype="<f8").copy())
    params = NetworkParams(specs=specs, head=head, weights=weights, biases=biases)
    _reset_adam(params)
    return params
