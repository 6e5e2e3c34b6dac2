"""Small dense networks with hand-written reverse mode and Adam.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
shape ``(n, fan_in)`` maps to ``X @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SELU_SCALE = 1.0507
SELU_ALPHA = 1.6732

HIDDEN_ACTIVATIONS = ("selu", "sigmoid", "identity")
OUTPUT_ACTIVATIONS = ("sigmoid", "identity", "one_minus_exp_neg")

RNG_ALGORITHMS = {
    "pcg64": np.random.PCG64,
    "philox": np.random.Philox,
    "sfc64": np.random.SFC64,
    "mt19937": np.random.MT19937,
}

CHECKPOINT_MAGIC = b"FMMNET 1\n"


class ShapeError(ValueError):
    pass


class StateError(RuntimeError):
    pass


def make_rng(seed, algorithm: str = "pcg64") -> np.random.Generator:
    """Seeded generator backed by a named bit generator."""
    try:
        bitgen = RNG_ALGORITHMS[algorithm.lower()]
    except KeyError:
        raise ValueError(f"unknown rng algorithm {algorithm!r}; expected one of {sorted(RNG_ALGORITHMS)}") from None
    return np.random.Generator(bitgen(seed))


def sigmoid(z):
    # tanh form: no overflow, and faster than expit on small arrays
    out = np.multiply(z, 0.5)
    np.tanh(out, out=out)
    out *= 0.5
    out += 0.5
    return out


def selu(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.minimum(z, 0.0, out=np.empty_like(z))
    np.expm1(out, out=out)
    out *= SELU_SCALE * SELU_ALPHA
    np.copyto(out, SELU_SCALE * z, where=z > 0)
    return out


def _activate(name, z):
    if name == "selu":
        return selu(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "identity":
        return z
    if name == "one_minus_exp_neg":
        return -np.expm1(-z)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, z, a):
    """Derivative of the activation, given pre-activation z and output a."""
    if name == "selu":
        # for z <= 0 the derivative is selu(z) + scale * alpha
        out = a + SELU_SCALE * SELU_ALPHA
        out[z > 0] = SELU_SCALE
        return out
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "identity":
        return np.ones_like(z)
    if name == "one_minus_exp_neg":
        return np.exp(-z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class DenseNet:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "selu"
    output_activation: str = "sigmoid"
    _cache: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output activation must be one of {OUTPUT_ACTIVATIONS}")
        dims = [int(d) for d in self.layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ShapeError(f"bad layer_dims {self.layer_dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("need one weight matrix and bias per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise ShapeError(f"layer {k}: weight {w.shape}, bias {b.shape} do not chain with {dims}")
        self.layer_dims = dims

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator, hidden_activation="selu", output_activation="sigmoid"):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases, hidden_activation, output_activation)

    @classmethod
    def zeros(cls, layer_dims, hidden_activation="selu", output_activation="sigmoid"):
        weights = [np.zeros((a, b)) for a, b in zip(layer_dims[:-1], layer_dims[1:])]
        biases = [np.zeros(b) for b in layer_dims[1:]]
        return cls(list(layer_dims), weights, biases, hidden_activation, output_activation)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def forward(self, inputs, cache: bool = True) -> np.ndarray:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None] if self.layer_dims[0] == 1 else x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise ShapeError(f"input width {x.shape[-1]} != {self.layer_dims[0]}")
        acts = [x]
        pre = []
        n_layers = len(self.weights)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            name = self.output_activation if k == n_layers - 1 else self.hidden_activation
            pre.append(z)
            acts.append(_activate(name, z))
        if cache:
            self._cache = (acts, pre)
        return acts[-1]

    def logits(self) -> np.ndarray:
        """Pre-activation of the output layer from the cached forward pass."""
        if self._cache is None:
            raise StateError("no forward pass cached")
        return self._cache[1][-1]

    def backward(self, grad_outputs, at_logits: bool = False):
        """Reverse-mode pass over the cached forward.

        ``grad_outputs`` is dLoss/d(output); with ``at_logits=True`` it is
        taken as dLoss/d(pre-activation of the output layer) instead, which
        lets callers fold a stable sigmoid-BCE gradient in directly.

        Returns ``(param_grads, input_grad)`` with ``param_grads`` ordered
        like :attr:`params`.
        """
        if self._cache is None:
            raise StateError("backward called without a cached forward pass")
        acts, pre = self._cache
        g = np.asarray(grad_outputs, dtype=np.float64)
        if g.ndim == 1:
            g = g[:, None]
        if g.shape != acts[-1].shape:
            raise ShapeError(f"upstream gradient {g.shape} != output {acts[-1].shape}")
        n_layers = len(self.weights)
        grads: list[np.ndarray] = [None] * (2 * n_layers)  # type: ignore[list-item]
        for k in range(n_layers - 1, -1, -1):
            name = self.output_activation if k == n_layers - 1 else self.hidden_activation
            if not (k == n_layers - 1 and at_logits):
                g = g * _activation_grad(name, pre[k], acts[k + 1])
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grads, g

    def input_gradient(self, inputs) -> np.ndarray:
        """d output / d input for a single-output net, one row per sample."""
        out = self.forward(inputs)
        _, gin = self.backward(np.ones_like(out))
        return gin

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)

    # -- checkpoint layout -------------------------------------------------
    # magic line, one JSON header line, then float64 little-endian blocks:
    # W_0 (row-major, fan_in x fan_out), b_0, W_1, b_1, ...

    def save(self, path) -> None:
        header = {
            "layer_dims": self.layer_dims,
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "dtype": "<f8",
        }
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for p in self.params:
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "DenseNet":
        raw = Path(path).read_bytes()
        if not raw.startswith(CHECKPOINT_MAGIC):
            raise ValueError(f"{path}: not a network checkpoint")
        rest = raw[len(CHECKPOINT_MAGIC):]
        nl = rest.index(b"\n")
        header = json.loads(rest[:nl])
        body = rest[nl + 1:]
        dims = header["layer_dims"]
        weights, biases, off = [], [], 0
        for a, b in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(body, dtype="<f8", count=a * b, offset=off).reshape(a, b).astype(np.float64)
            off += 8 * a * b
            bias = np.frombuffer(body, dtype="<f8", count=b, offset=off).astype(np.float64)
            off += 8 * b
            weights.append(w)
            biases.append(bias)
        if off != len(body):
            raise ValueError(f"{path}: {len(body) - off} trailing bytes")
        return cls(dims, weights, biases, header["hidden_activation"], header["output_activation"])


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] | None = None
    second_moment: list[np.ndarray] | None = None

    @classmethod
    def for_params(cls, params, lr: float) -> "AdamState":
        return cls(
            lr=lr,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )


def adam_step(state: AdamState, params, grads, maximize: bool = False) -> None:
    """In-place bias-corrected Adam update of ``params``."""
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    if state.first_moment is None:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        if maximize:
            g = -g
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
