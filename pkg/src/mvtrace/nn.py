"""Minimal dense feed-forward network engine.

Double-precision numpy throughout: dense layers with linear/relu/sigmoid
activations, mean-squared-error loss, exact backpropagation, and Adam.
Deliberately small — just enough to train the autoencoder stacks used by
this package, deterministically for a fixed seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("linear", "relu", "sigmoid")
ACTIVATION_CODES = {"linear": 0, "relu": 1, "sigmoid": 2}
CODE_ACTIVATIONS = {v: k for k, v in ACTIVATION_CODES.items()}

MODEL_MAGIC = b"MVNN"


def apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return expit(z)
    raise ValueError(f"unknown activation {name!r}")


def activation_derivative(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (a = activation(z))."""
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    """Affine map plus pointwise activation: x -> act(x @ weights + bias)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D (fan_in, fan_out)")
        if self.bias.shape != (self.weights.shape[1],):
            raise ValueError(
                f"bias shape {self.bias.shape} incompatible with weights "
                f"{self.weights.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


def glorot_layer(fan_in: int, fan_out: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    """Glorot-uniform initialized layer with zero bias."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return DenseLayer(weights=weights, bias=np.zeros(fan_out), activation=activation)


class MLP:
    """Ordered stack of dense layers with chained shape consistency."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ValueError("MLP needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ValueError(
                    f"layer chain mismatch: fan_out {prev.fan_out} -> fan_in {nxt.fan_in}"
                )
        self.layers = list(layers)

    @classmethod
    def from_dims(
        cls,
        dims: list[int],
        hidden_activation: str,
        output_activation: str,
        rng: np.random.Generator,
    ) -> "MLP":
        """Build a stack from a dimension list ``[in, h1, ..., out]``.

        All layers use ``hidden_activation`` except the last, which uses
        ``output_activation``.
        """
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        layers = []
        for k in range(len(dims) - 1):
            act = output_activation if k == len(dims) - 2 else hidden_activation
            layers.append(glorot_layer(dims[k], dims[k + 1], act, rng))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...] (live arrays)."""
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_batch(x, self.input_dim)
        for layer in self.layers:
            x = apply_activation(layer.activation, x @ layer.weights + layer.bias)
        return x

    def forward_cache(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs/pre-activations/outputs."""
        a = _as_batch(x, self.input_dim)
        inputs, preacts, outputs = [], [], []
        for layer in self.layers:
            inputs.append(a)
            z = a @ layer.weights + layer.bias
            a = apply_activation(layer.activation, z)
            preacts.append(z)
            outputs.append(a)
        return a, (inputs, preacts, outputs)

    def backward_cache(self, cache, grad_output: np.ndarray):
        """Backpropagate an output-side gradient through the cached pass.

        Returns (per-layer [(dW, db), ...], gradient w.r.t. the input batch).
        """
        inputs, preacts, outputs = cache
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        g = grad_output
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            delta = g * activation_derivative(layer.activation, preacts[k], outputs[k])
            grads[k] = (inputs[k].T @ delta, delta.sum(axis=0))
            g = delta @ layer.weights.T
        return grads, g

    def copy(self) -> "MLP":
        return MLP(
            [
                DenseLayer(l.weights.copy(), l.bias.copy(), l.activation)
                for l in self.layers
            ]
        )


def _as_batch(x: np.ndarray, expected_dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != expected_dim:
        raise ValueError(f"input shape {x.shape} incompatible with fan_in {expected_dim}")
    return x


def mse_loss(prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean over all batch x k entries of the squared difference."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch {prediction.shape} vs {target.shape}")
    diff = prediction - target
    return float(np.mean(diff * diff))


def mse_gradient(prediction: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of mse_loss w.r.t. the prediction."""
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch {prediction.shape} vs {target.shape}")
    return 2.0 * (prediction - target) / prediction.size


def backward(mlp: MLP, x: np.ndarray, target: np.ndarray):
    """Exact gradient of ``mse_loss(mlp.forward(x), target)`` for every layer.

    Returns a list of (dW, db) pairs aligned with ``mlp.layers``.
    """
    out, cache = mlp.forward_cache(x)
    target = _as_batch(target, mlp.output_dim)
    grads, _ = mlp.backward_cache(cache, mse_gradient(out, target))
    return grads


@dataclass
class AdamState:
    """Adam accumulator state over a fixed parameter list."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    moment1: list[np.ndarray] = field(default_factory=list)
    moment2: list[np.ndarray] = field(default_factory=list)
    timestep: int = 0

    @classmethod
    def for_parameters(cls, params: list[np.ndarray], learning_rate: float = 1e-3) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            moment1=[np.zeros_like(p) for p in params],
            moment2=[np.zeros_like(p) for p in params],
        )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(state.moment1) or len(params) != len(grads):
        raise ValueError("params/grads length mismatch with Adam state")
    state.timestep += 1
    t = state.timestep
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.moment1, state.moment2):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params


def train_mlp(
    mlp: MLP,
    x: np.ndarray,
    targets: np.ndarray,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
) -> list[float]:
    """Adam-train an MLP on (x, targets); returns per-epoch mean losses.

    Samples are reshuffled every epoch from the seeded generator, so the
    whole run is a pure function of (initial weights, data, config, seed).
    """
    x = _as_batch(x, mlp.input_dim)
    targets = _as_batch(targets, mlp.output_dim)
    if x.shape[0] != targets.shape[0]:
        raise ValueError("x and targets disagree on sample count")
    if x.shape[0] == 0:
        raise ValueError("empty training data")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    params = mlp.parameters()
    state = AdamState.for_parameters(params, learning_rate)
    n = x.shape[0]
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, tb = x[idx], targets[idx]
            out, cache = mlp.forward_cache(xb)
            total += mse_loss(out, tb) * idx.size
            layer_grads, _ = mlp.backward_cache(cache, mse_gradient(out, tb))
            flat = [g for pair in layer_grads for g in pair]
            adam_step(state, params, flat)
        losses.append(total / n)
    return losses


# --- binary serialization ---------------------------------------------------
#
# Layout (all integers little-endian):
#   magic 'MVNN' | version u32 | layer_count u32 |
#   per layer: fan_in u32, fan_out u32, activation code u32,
#              weights f64 row-major, biases f64
#
# Version 1 holds exactly one MLP in this layout.  Version 2 (see mvtrace.io)
# prepends a JSON header and packs several named MLP payloads.


def write_mlp_payload(fh, mlp: MLP) -> None:
    fh.write(struct.pack("<I", len(mlp.layers)))
    for layer in mlp.layers:
        fh.write(
            struct.pack(
                "<III", layer.fan_in, layer.fan_out, ACTIVATION_CODES[layer.activation]
            )
        )
        fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())


def read_mlp_payload(fh) -> MLP:
    (layer_count,) = struct.unpack("<I", _read_exact(fh, 4))
    layers = []
    for _ in range(layer_count):
        fan_in, fan_out, code = struct.unpack("<III", _read_exact(fh, 12))
        if code not in CODE_ACTIVATIONS:
            raise ValueError(f"unknown activation code {code}")
        weights = np.frombuffer(
            _read_exact(fh, 8 * fan_in * fan_out), dtype="<f8"
        ).reshape(fan_in, fan_out).astype(np.float64)
        bias = np.frombuffer(_read_exact(fh, 8 * fan_out), dtype="<f8").astype(np.float64)
        layers.append(DenseLayer(weights, bias, CODE_ACTIVATIONS[code]))
    return MLP(layers)


def save_mlp(path, mlp: MLP) -> None:
    """Write a single MLP as a version-1 MVNN file."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", 1))
        write_mlp_payload(fh, mlp)


def load_mlp(path) -> MLP:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not an MVNN file (magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != 1:
            raise ValueError(f"{path}: expected bare MLP (version 1), got {version}")
        return read_mlp_payload(fh)


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data
