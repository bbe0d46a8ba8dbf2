"""Single-frame, stateless reconstruction from marker poses"""

from dataclasses import dataclass
from typing import List, Tuple

from ..datagen import features_from_arrays
from ..errors import ChecksumMismatch, ShapeMismatch
from ..geom import FloatArray, Pose
from ..reduction import BasisSet, synthesize_values
from ..rod import MeasurementSet, ReconstructionObjective, RodProperties, StrainField
from .model import MlpModel, forward
from .training import check_layout


@dataclass(frozen=True)
class InferenceResult:
    coefficients: FloatArray
    strain: StrainField
    rotations: FloatArray
    positions: FloatArray
    error: float

    @property
    def poses(self) -> List[Pose]:
        return [Pose(r, x) for r, x in zip(self.rotations, self.positions)]

    @property
    def tip(self) -> FloatArray:
        return self.positions[-1]


class Reconstructor:
    """Model, basis and rod kernel bound together for repeated inference"""

    def __init__(self, model: MlpModel, basis: BasisSet, rod: RodProperties, base: Pose):
        if model.basis_checksum and model.basis_checksum != basis.checksum():
            raise ChecksumMismatch("Model was trained against a different basis")
        if model.n_outputs != basis.n_coefficients:
            raise ShapeMismatch(
                f"Model outputs {model.n_outputs} coefficients, basis expects {basis.n_coefficients}"
            )
        self.model = model
        self.basis = basis
        self.rod = rod
        self.kernel = ReconstructionObjective(rod, base, model.marker_s, eta=1.0, grid=basis.grid)

    def reconstruct(self, meas: MeasurementSet) -> InferenceResult:
        check_layout(meas.arc_lengths, self.model.marker_s, self.rod.length)
        features = features_from_arrays(meas.rotations, meas.positions).reshape(-1)
        alpha = forward(self.model, features)
        values = synthesize_values(self.basis, alpha)
        rot, pos, tape = self.kernel.integrate(values)
        m_rot, m_pos, _ = self.kernel.marker_poses(rot, pos, tape)
        phi = self.kernel.mismatch(m_rot, m_pos, meas.rotations[None], meas.positions[None])
        return InferenceResult(
            coefficients=alpha,
            strain=StrainField(self.basis.grid, values[0]),
            rotations=rot[0],
            positions=pos[0],
            error=float(phi[0]) / meas.count,
        )


def infer(
    model: MlpModel, basis: BasisSet, rod: RodProperties, base: Pose, meas: MeasurementSet
) -> Tuple[StrainField, List[Pose], float]:
    """Strain field, node poses and per-marker mismatch e_t for one frame"""
    result = Reconstructor(model, basis, rod, base).reconstruct(meas)
    return result.strain, result.poses, result.error
