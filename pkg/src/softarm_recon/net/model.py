"""
Two-hidden-layer SiLU perceptron in numpy

Inputs are the flattened marker features [x, d1, d3] per marker with the
positions divided by the rod length. The output layer produces coefficients
in standardised units; `coefficients` rescales them with the basis
coefficient statistics stored on the model.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from ..errors import ShapeMismatch
from ..geom import FloatArray

FEATURES_PER_MARKER = 9

# Layer inputs and hidden pre-activations kept for backprop
Cache = Tuple[List[FloatArray], List[FloatArray]]


def silu(x: FloatArray) -> FloatArray:
    return x * expit(x)


def silu_grad(x: FloatArray) -> FloatArray:
    s = expit(x)
    return s * (1.0 + x * (1.0 - s))


@dataclass
class MlpModel:
    """Weights (fan_in, fan_out) and biases per layer, plus input/output scaling"""

    layer_sizes: List[int]
    weights: List[FloatArray]
    biases: List[FloatArray]
    marker_s: FloatArray
    position_scale: float = 1.0
    coeff_mean: Optional[FloatArray] = None
    coeff_std: Optional[FloatArray] = None
    basis_checksum: str = ""
    activation: str = field(default="silu")

    def __post_init__(self) -> None:
        sizes = [int(n) for n in self.layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ShapeMismatch(f"Invalid layer sizes {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeMismatch("One weight matrix and one bias vector per layer are required")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ShapeMismatch(
                    f"Layer {k} has weight {w.shape} and bias {b.shape}, "
                    f"expected ({sizes[k]}, {sizes[k + 1]}) and ({sizes[k + 1]},)"
                )
        self.layer_sizes = sizes
        self.marker_s = np.asarray(self.marker_s, dtype=np.float64).reshape(-1)
        if sizes[0] != FEATURES_PER_MARKER * self.marker_s.size:
            raise ShapeMismatch(
                f"Input layer of {sizes[0]} does not fit {self.marker_s.size} markers"
            )
        n_out = sizes[-1]
        self.coeff_mean = (
            np.zeros(n_out) if self.coeff_mean is None else np.asarray(self.coeff_mean, dtype=np.float64)
        )
        self.coeff_std = (
            np.ones(n_out) if self.coeff_std is None else np.asarray(self.coeff_std, dtype=np.float64)
        )
        if self.coeff_mean.shape != (n_out,) or self.coeff_std.shape != (n_out,):
            raise ShapeMismatch("Coefficient statistics must match the output layer")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_markers(self) -> int:
        return int(self.marker_s.size)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> List[FloatArray]:
        """[W1, b1, W2, b2, ...]"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_parameters(self, params: Sequence[FloatArray]) -> "MlpModel":
        return replace(
            self,
            weights=[np.array(p) for p in params[0::2]],
            biases=[np.array(p) for p in params[1::2]],
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def normalize_inputs(self, features: npt.ArrayLike) -> FloatArray:
        """Flat features (..., 9 N_m) with marker positions divided by the length scale"""
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.n_inputs:
            raise ShapeMismatch(f"Expected {self.n_inputs} input features, got {x.shape[-1]}")
        x = x.reshape(x.shape[:-1] + (self.n_markers, FEATURES_PER_MARKER)).copy()
        x[..., 0:3] /= self.position_scale
        return x.reshape(x.shape[:-2] + (self.n_inputs,))

    def coefficients(self, z: FloatArray) -> FloatArray:
        return self.coeff_mean + self.coeff_std * z


def glorot_uniform(
    layer_sizes: Sequence[int], rng: np.random.Generator
) -> Tuple[List[FloatArray], List[FloatArray]]:
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def init_model(
    layer_sizes: Sequence[int],
    marker_s: npt.ArrayLike,
    seed: int,
    position_scale: float = 1.0,
    coeff_mean: Optional[npt.ArrayLike] = None,
    coeff_std: Optional[npt.ArrayLike] = None,
    basis_checksum: str = "",
) -> MlpModel:
    weights, biases = glorot_uniform(layer_sizes, np.random.default_rng(seed))
    return MlpModel(
        layer_sizes=list(layer_sizes),
        weights=weights,
        biases=biases,
        marker_s=np.asarray(marker_s, dtype=np.float64),
        position_scale=position_scale,
        coeff_mean=None if coeff_mean is None else np.asarray(coeff_mean, dtype=np.float64),
        coeff_std=None if coeff_std is None else np.asarray(coeff_std, dtype=np.float64),
        basis_checksum=basis_checksum,
    )


def forward_raw(model: MlpModel, x: FloatArray) -> Tuple[FloatArray, Cache]:
    """Standardised outputs for already-normalised inputs (B, n_in)"""
    inputs, pre = [], []
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        inputs.append(h)
        a = h @ w + b
        pre.append(a)
        h = silu(a)
    inputs.append(h)
    return h @ model.weights[-1] + model.biases[-1], (inputs, pre)


def backward(model: MlpModel, cache: Cache, z_bar: FloatArray) -> List[FloatArray]:
    """Parameter gradients [dW1, db1, ...] for the output cotangent z_bar (B, n_out)"""
    inputs, pre = cache
    grads: List[FloatArray] = [np.empty(0)] * (2 * len(model.weights))
    delta = z_bar
    for k in range(len(model.weights) - 1, -1, -1):
        grads[2 * k] = inputs[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * silu_grad(pre[k - 1])
    return grads


def forward(model: MlpModel, features: npt.ArrayLike) -> FloatArray:
    """Coefficient vector(s) for flat marker features (9 N_m,) or (B, 9 N_m)"""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    z, _ = forward_raw(model, np.atleast_2d(model.normalize_inputs(x)))
    alpha = model.coefficients(z)
    return alpha[0] if single else alpha
