"""
Physics-informed loss through the rod chain

The loss of a sample is the reconstruction objective J = U + (eta/2) Phi of
the strain field synthesised from the network output, measured against the
sample's own noisy marker poses. Ground-truth coefficients are never read.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Tuple

import numpy as np
import numpy.typing as npt

from ..datagen import arrays_from_features
from ..geom import FloatArray, Pose
from ..reduction import BasisSet, synthesis_vjp, synthesize_values
from ..rod import ReconstructionObjective, RodProperties
from .model import MlpModel, backward, forward_raw

# Samples per gradient work unit. Chunks are fixed by sample index, so the
# reduction order and the result do not depend on the thread count.
GRADIENT_CHUNK = 64
VALUE_CHUNK = 1024


class PhysicsLoss:
    """Batch-mean objective of a model on marker features (B, N_m, 9)"""

    def __init__(
        self,
        basis: BasisSet,
        rod: RodProperties,
        base: Pose,
        marker_s: npt.ArrayLike,
        eta: float,
        threads: int = 1,
    ):
        self.basis = basis
        self.kernel = ReconstructionObjective(rod, base, marker_s, eta, grid=basis.grid)
        self.threads = max(1, int(threads))

    @property
    def eta(self) -> float:
        return self.kernel.eta

    @property
    def n_markers(self) -> int:
        return self.kernel.n_markers

    def normalization(self) -> float:
        """Raw loss divided by this gives the normalised loss"""
        return self.eta * self.n_markers

    def _chunks(self, count: int, size: int) -> List[slice]:
        return [slice(start, min(start + size, count)) for start in range(0, count, size)]

    def _map(self, fn, items):
        if self.threads == 1 or len(items) == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def per_sample(self, model: MlpModel, features: FloatArray) -> Tuple[FloatArray, FloatArray, FloatArray]:
        """(J, U, Phi) of every sample"""
        features = np.asarray(features, dtype=np.float64)

        def run(part: slice) -> Tuple[FloatArray, FloatArray, FloatArray]:
            chunk = features[part]
            x = model.normalize_inputs(chunk.reshape(chunk.shape[0], -1))
            z, _ = forward_raw(model, x)
            values = synthesize_values(self.basis, model.coefficients(z))
            meas_rot, meas_pos = arrays_from_features(chunk)
            return self.kernel.evaluate(values, meas_rot, meas_pos)

        results = self._map(run, self._chunks(features.shape[0], VALUE_CHUNK))
        return tuple(np.concatenate([r[i] for r in results]) for i in range(3))

    def value(self, model: MlpModel, features: FloatArray) -> float:
        objective, _, _ = self.per_sample(model, features)
        return float(objective.mean())

    def value_and_gradient(
        self, model: MlpModel, features: FloatArray
    ) -> Tuple[float, List[FloatArray]]:
        """Batch-mean loss and its gradient with respect to [W1, b1, W2, b2, ...]"""
        features = np.asarray(features, dtype=np.float64)
        count = features.shape[0]

        def run(part: slice) -> Tuple[float, List[FloatArray]]:
            chunk = features[part]
            x = model.normalize_inputs(chunk.reshape(chunk.shape[0], -1))
            z, cache = forward_raw(model, x)
            values = synthesize_values(self.basis, model.coefficients(z))
            meas_rot, meas_pos = arrays_from_features(chunk)
            objective, values_bar, _, _ = self.kernel.evaluate_with_gradient(
                values, meas_rot, meas_pos
            )
            z_bar = synthesis_vjp(self.basis, values_bar) * model.coeff_std
            return float(objective.sum()), backward(model, cache, z_bar)

        results = self._map(run, self._chunks(count, GRADIENT_CHUNK))
        total = 0.0
        grads = [np.zeros_like(p) for p in model.parameters()]
        for part_total, part_grads in results:
            total += part_total
            for g, pg in zip(grads, part_grads):
                g += pg
        return total / count, [g / count for g in grads]


def loss(
    model: MlpModel,
    features: FloatArray,
    basis: BasisSet,
    rod: RodProperties,
    base: Pose,
    marker_s: npt.ArrayLike,
    eta: float,
) -> float:
    """Mean objective over a batch of marker features (B, N_m, 9)"""
    return PhysicsLoss(basis, rod, base, marker_s, eta).value(model, features)


def loss_gradient(
    model: MlpModel,
    features: FloatArray,
    basis: BasisSet,
    rod: RodProperties,
    base: Pose,
    marker_s: npt.ArrayLike,
    eta: float,
) -> List[FloatArray]:
    _, grads = PhysicsLoss(basis, rod, base, marker_s, eta).value_and_gradient(model, features)
    return grads
