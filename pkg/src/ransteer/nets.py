"""Dense feedforward networks with hand-rolled reverse-mode gradients.

Everything the factorizer, sub-policies, and critics need: rectified-linear
hidden layers, three output heads (identity, a logistic squash onto (0,1],
and a probability simplex), plus an adaptive-moment optimizer. Kept small and
transparent so gradient checks against finite differences stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, UnsupportedError

OUTPUT_ACTIVATIONS = ("identity", "squash", "softmax")

# Squash floor keeps outputs strictly above zero so log(action) is finite even
# when the logistic underflows.
SQUASH_FLOOR = 1e-6


@dataclass
class ForwardCache:
    """Per-layer values captured during forward, consumed by backward."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    output: np.ndarray


class DenseNet:
    """Fully connected network; parameters are plain float64 arrays."""

    def __init__(self, layer_sizes: list[int], output_activation: str,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise UnsupportedError(f"unknown output activation '{output_activation}'")
        if len(layer_sizes) < 2:
            raise UnsupportedError("need at least input and output layer sizes")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_sizes[i], layer_sizes[i + 1]) or b.shape != (layer_sizes[i + 1],):
                raise UnsupportedError(f"layer {i} parameter shapes do not match layer sizes")
        self.layer_sizes = list(layer_sizes)
        self.output_activation = output_activation
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, layer_sizes: list[int], output_activation: str,
               rng: np.random.Generator) -> "DenseNet":
        """Fan-in-scaled uniform init, deterministic under the given generator."""
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            biases.append(rng.uniform(-bound, bound, size=(n_out,)))
        return cls(layer_sizes, output_activation, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, layer-major, weight before bias."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_parameter_vector(self, vec: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p[...] = vec[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != vec.size:
            raise UnsupportedError("parameter vector length mismatch")

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_sizes),
            self.output_activation,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def same_architecture(self, other: "DenseNet") -> bool:
        return (self.layer_sizes == other.layer_sizes
                and self.output_activation == other.output_activation)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        """Evaluate the network on a (B, n_in) batch or single n_in vector."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x.reshape(1, -1)
        if x.shape[1] != self.input_dim:
            raise ValueError(f"input dim {x.shape[1]} != {self.input_dim}")

        pre, act = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            else:
                h = self._apply_output(z)
            act.append(h)
        cache = ForwardCache(inputs=x, pre_activations=pre, activations=act, output=h)
        return (h[0] if single else h), cache

    def _apply_output(self, z: np.ndarray) -> np.ndarray:
        if self.output_activation == "identity":
            return z
        if self.output_activation == "squash":
            s = _sigmoid(z)
            return SQUASH_FLOOR + (1.0 - SQUASH_FLOOR) * s
        # softmax, stabilized per row
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def backward(self, cache: ForwardCache,
                 output_gradient: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss given dL/d(output).

        Returns (parameter gradients in parameters() order, dL/d(input)).
        """
        if cache is None or cache.output is None:
            raise UnsupportedError("backward requires the cache from a matching forward call")
        g = np.asarray(output_gradient, dtype=float)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        if g.shape != cache.output.shape:
            raise ValueError(f"output gradient shape {g.shape} != {cache.output.shape}")

        delta = self._output_backward(cache, g)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = cache.inputs if i == 0 else cache.activations[i - 1]
            grads[2 * i] = h_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * (cache.pre_activations[i - 1] > 0.0)
        return grads, delta

    def _output_backward(self, cache: ForwardCache, g: np.ndarray) -> np.ndarray:
        if self.output_activation == "identity":
            return g
        if self.output_activation == "squash":
            y = cache.output
            s = (y - SQUASH_FLOOR) / (1.0 - SQUASH_FLOOR)
            return g * (1.0 - SQUASH_FLOOR) * s * (1.0 - s)
        # softmax Jacobian: dz = y * (g - sum(g * y))
        y = cache.output
        dot = (g * y).sum(axis=1, keepdims=True)
        return y * (g - dot)

    def state_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "output_activation": self.output_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_state_dict(cls, obj: dict) -> "DenseNet":
        return cls(
            [int(n) for n in obj["layer_sizes"]],
            obj["output_activation"],
            [np.array(w, dtype=float) for w in obj["weights"]],
            [np.array(b, dtype=float) for b in obj["biases"]],
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Adam:
    """Adaptive-moment optimizer bound to one parameter list.

    Updates are applied in place with bias correction; ``step_count`` is the
    number of completed steps.
    """

    params: list[np.ndarray]
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    label: str = "net"
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros_like(p) for p in self.params]
        if not self.v:
            self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise TrainingError(f"{self.label}: expected {len(self.params)} gradients")
        for i, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"{self.label}: non-finite gradient at parameter {i}")
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)

    def state_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "step_count": self.step_count,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    def load_state_dict(self, obj: dict) -> None:
        self.learning_rate = float(obj["learning_rate"])
        self.beta1 = float(obj["beta1"])
        self.beta2 = float(obj["beta2"])
        self.epsilon = float(obj["epsilon"])
        self.step_count = int(obj["step_count"])
        self.m = [np.array(a, dtype=float) for a in obj["m"]]
        self.v = [np.array(a, dtype=float) for a in obj["v"]]
