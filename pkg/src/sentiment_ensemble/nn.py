"""Dense feed-forward networks with hand-written reverse-mode gradients.

Parameters are plain immutable records (:class:`MlpParams`); every operation
returns new values instead of mutating its inputs. Inputs may be a single
vector of shape ``(n_in,)`` or a batch of shape ``(n, n_in)``; gradients of a
batch are summed over its rows.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sentiment_ensemble.errors import DimensionMismatch

logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "relu", "identity")

#: Adaptive-moment optimizer constants
BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights, biases and activations of a multilayer perceptron.

    Layer ``i`` computes ``activation_i(x @ weights[i] + biases[i])`` with
    ``weights[i]`` of shape ``(n_in, n_out)``.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]

    def __post_init__(self) -> None:
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b) for b in self.biases)
        activations = tuple(self.activations)
        if not (len(weights) == len(biases) == len(activations)) or not weights:
            raise DimensionMismatch("Every layer needs a weight, a bias and an activation")
        for i, (w, b, act) in enumerate(zip(weights, biases, activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"Unknown activation {act!r}")
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionMismatch(f"Layer {i} has inconsistent shapes")
            if i and weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionMismatch(f"Layer {i} input does not match layer {i - 1}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"Layer {i} has non-finite parameters")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "activations", activations)

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_size, *(w.shape[1] for w in self.weights))

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], activations: Sequence[str]):
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]), tuple(activations))

    def same_shape(self, other: "MlpParams") -> bool:
        return self.activations == other.activations and all(
            a.shape == b.shape for a, b in zip(self.arrays(), other.arrays())
        )

    def equals(self, other: "MlpParams") -> bool:
        """Exact elementwise equality of every parameter."""
        return self.same_shape(other) and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass(frozen=True, eq=False)
class GradientTape:
    """Gradients matching the shapes of an :class:`MlpParams`, plus the input gradient."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    inputs: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def scaled(self, factor: float) -> "GradientTape":
        return GradientTape(
            tuple(w * factor for w in self.weights),
            tuple(b * factor for b in self.biases),
            None if self.inputs is None else self.inputs * factor,
        )

    def __add__(self, other: "GradientTape") -> "GradientTape":
        return GradientTape(
            tuple(a + b for a, b in zip(self.weights, other.weights)),
            tuple(a + b for a, b in zip(self.biases, other.biases)),
        )

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a * a) for a in self.arrays())))

    def clipped(self, max_norm: float) -> "GradientTape":
        """Rescale so the global norm is at most ``max_norm`` (0 disables)."""
        if max_norm <= 0:
            return self
        norm = self.norm()
        if norm <= max_norm:
            return self
        return self.scaled(max_norm / norm)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment estimates for a list of arrays."""

    first: tuple[np.ndarray, ...]
    second: tuple[np.ndarray, ...]
    steps: int = 0

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "AdamState":
        return cls(
            tuple(np.zeros_like(a) for a in arrays),
            tuple(np.zeros_like(a) for a in arrays),
        )


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z: np.ndarray, y: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - y * y
    if activation == "relu":
        return (z > 0).astype(np.float64)
    return np.ones_like(z)


def init_mlp(
    layer_sizes: Sequence[int],
    rng: np.random.Generator,
    hidden_activation: str = "tanh",
    output_activation: str = "identity",
) -> MlpParams:
    """Initialize an MLP uniformly in ``±1/sqrt(fan_in)``.

    Parameters
    ----------
    layer_sizes : Sequence[int]
        Input size, hidden sizes and output size.
    rng : numpy.random.Generator
        Seeded generator.
    hidden_activation : str, optional
        Activation of hidden layers. Default is "tanh".
    output_activation : str, optional
        Activation of the output layer. Default is "identity".

    Returns
    -------
    MlpParams
        Freshly initialized parameters.
    """
    if len(layer_sizes) < 2:
        raise ValueError("An MLP needs at least an input and an output size")
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    activations = [hidden_activation] * (len(weights) - 1) + [output_activation]
    return MlpParams(tuple(weights), tuple(biases), tuple(activations))


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.input_size:
        raise DimensionMismatch(
            f"Input of shape {x.shape} does not match network input size "
            f"{params.input_size}"
        )
    return x


def _forward_trace(params: MlpParams, x: np.ndarray):
    pre, post = [], [x]
    for w, b, act in zip(params.weights, params.biases, params.activations):
        z = post[-1] @ w + b
        pre.append(z)
        post.append(_activate(z, act))
    return pre, post


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Network output for a vector or a batch of row vectors.

    Raises
    ------
    DimensionMismatch
        If the input size differs from the first layer's.
    """
    x = _check_input(params, x)
    return _forward_trace(params, x)[1][-1]


def backward(
    params: MlpParams, x: np.ndarray, upstream: np.ndarray
) -> GradientTape:
    """Gradient of ``sum(forward(params, x) * upstream)``.

    Parameters
    ----------
    params : MlpParams
        Network parameters.
    x : numpy.ndarray
        Input vector or batch.
    upstream : numpy.ndarray
        Gradient of the scalar objective with respect to the output; same
        shape as the output.

    Returns
    -------
    GradientTape
        Gradients for every weight and bias, and for the input.
    """
    x = _check_input(params, x)
    pre, post = _forward_trace(params, x)
    grad = np.asarray(upstream, dtype=np.float64)
    if grad.shape != post[-1].shape:
        raise DimensionMismatch(
            f"Upstream gradient of shape {grad.shape} does not match output "
            f"shape {post[-1].shape}"
        )

    n_layers = len(params.weights)
    weight_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    bias_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    for i in reversed(range(n_layers)):
        delta = grad * _activation_grad(pre[i], post[i + 1], params.activations[i])
        inputs = post[i]
        if delta.ndim == 1:
            weight_grads[i] = np.outer(inputs, delta)
            bias_grads[i] = delta
        else:
            weight_grads[i] = inputs.T @ delta
            bias_grads[i] = delta.sum(axis=0)
        grad = delta @ params.weights[i].T
    return GradientTape(tuple(weight_grads), tuple(bias_grads), grad)


def adam_update(
    arrays: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    learning_rate: float,
) -> tuple[list[np.ndarray], AdamState]:
    """One adaptive-moment descent step on a list of arrays."""
    steps = state.steps + 1
    first, second, updated = [], [], []
    for a, g, m, v in zip(arrays, grads, state.first, state.second):
        m = BETA1 * m + (1.0 - BETA1) * g
        v = BETA2 * v + (1.0 - BETA2) * g * g
        m_hat = m / (1.0 - BETA1**steps)
        v_hat = v / (1.0 - BETA2**steps)
        updated.append(a - learning_rate * m_hat / (np.sqrt(v_hat) + EPSILON))
        first.append(m)
        second.append(v)
    return updated, AdamState(tuple(first), tuple(second), steps)


def optimizer_step(
    params: MlpParams,
    tape: GradientTape,
    state: AdamState,
    learning_rate: float,
) -> tuple[MlpParams, AdamState]:
    """Adaptive-moment descent step along ``tape``.

    Decay rates are 0.9 and 0.999 with epsilon 1e-8. To ascend an objective,
    pass a tape scaled by -1.

    Returns
    -------
    tuple of (MlpParams, AdamState)
        Updated parameters and optimizer state.
    """
    updated, state = adam_update(params.arrays(), tape.arrays(), state, learning_rate)
    return MlpParams.from_arrays(updated, params.activations), state


def polyak_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Soft copy ``tau * online + (1 - tau) * target``, elementwise.

    Raises
    ------
    DimensionMismatch
        If the two networks differ in shape.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    if not target.same_shape(online):
        raise DimensionMismatch("Target and online networks differ in shape")
    if tau == 1.0:
        return online
    if tau == 0.0:
        return target
    # clip keeps rounding from leaving the segment between target and online
    mixed = [
        np.clip(tau * o + (1.0 - tau) * t, np.minimum(t, o), np.maximum(t, o))
        for t, o in zip(target.arrays(), online.arrays())
    ]
    return MlpParams.from_arrays(mixed, target.activations)


def params_to_dict(params: MlpParams) -> dict:
    """Layer shapes and activations, for checkpoint metadata."""
    return {
        "layer_sizes": list(params.layer_sizes),
        "activations": list(params.activations),
    }
