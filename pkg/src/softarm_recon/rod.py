"""
Cosserat rod strain fields, kinematics and the reconstruction objective

The posture is integrated from the base with one exact SE(3) step per grid
segment, using the mean of the two nodal strains (second order). Markers
between nodes get a partial step with that segment's strain. The objective
is J = U + (eta/2) * Phi, with U the linear-elastic energy integrated by the
trapezoid rule, and its gradient with respect to every nodal strain value
is accumulated in reverse through the product of exponentials.

`ReconstructionObjective` is the batched kernel shared by training and the
baseline solver; the module-level functions are the single-field API.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import LengthMismatch, NonFiniteStrain, OutOfRange, ShapeMismatch
from .geom import FloatArray, Pose, pose_mismatch, se3_exp, se3_exp_vjp

logger = logging.getLogger(__name__)

STRAIN_DIM = 6
NODE_TOL = 1e-12
REST_STRAIN = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])

# Intermediate arrays kept from the forward pass for the reverse sweep
Tape = Dict[str, FloatArray]


@dataclass(frozen=True)
class StrainVector:
    """Curvatures/twist kappa (rad/m) and shears/stretch nu (dimensionless)"""

    kappa: FloatArray = field(default_factory=lambda: np.zeros(3))
    nu: FloatArray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self) -> None:
        kappa = np.asarray(self.kappa, dtype=np.float64).reshape(3)
        nu = np.asarray(self.nu, dtype=np.float64).reshape(3)
        if nu[2] <= 0:
            raise OutOfRange(f"Stretch must be positive, got {nu[2]}")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> "StrainVector":
        values = np.asarray(values, dtype=np.float64).reshape(STRAIN_DIM)
        return cls(values[:3], values[3:])

    def as_array(self) -> FloatArray:
        return np.concatenate([self.kappa, self.nu])


@dataclass(frozen=True)
class RodProperties:
    """Rest length, grid size, diagonal stiffness and rest strain of the rod

    `taper_ratio` is the tip-to-base radius ratio of a linearly tapered
    cross-section; angular stiffness scales with r^4 and linear stiffness
    with r^2 along the arc length. 1.0 is a uniform rod.
    """

    length: float
    n_nodes: int = 100
    stiffness_angular: FloatArray = field(default_factory=lambda: np.ones(3))
    stiffness_linear: FloatArray = field(default_factory=lambda: np.ones(3))
    rest_strain: StrainVector = field(default_factory=StrainVector)
    taper_ratio: float = 1.0

    def __post_init__(self) -> None:
        angular = np.asarray(self.stiffness_angular, dtype=np.float64).reshape(3)
        linear = np.asarray(self.stiffness_linear, dtype=np.float64).reshape(3)
        if self.length <= 0:
            raise OutOfRange(f"Rod length must be positive, got {self.length}")
        if self.n_nodes < 2:
            raise OutOfRange(f"Rod needs at least 2 nodes, got {self.n_nodes}")
        if np.any(angular <= 0) or np.any(linear <= 0):
            raise OutOfRange("Stiffness entries must be positive")
        if not 0 < self.taper_ratio <= 1:
            raise OutOfRange(f"Taper ratio must lie in (0, 1], got {self.taper_ratio}")
        object.__setattr__(self, "stiffness_angular", angular)
        object.__setattr__(self, "stiffness_linear", linear)

    def grid(self) -> FloatArray:
        grid = np.linspace(0.0, self.length, self.n_nodes)
        grid[-1] = self.length
        return grid

    def stiffness_profile(self, grid: npt.ArrayLike) -> FloatArray:
        """Per-node diagonal stiffness, shape (N, 6)"""
        grid = np.asarray(grid, dtype=np.float64)
        radius = 1.0 - (1.0 - self.taper_ratio) * grid / self.length
        angular = self.stiffness_angular[None, :] * (radius**4)[:, None]
        linear = self.stiffness_linear[None, :] * (radius**2)[:, None]
        return np.concatenate([angular, linear], axis=1)


@dataclass(frozen=True)
class StrainField:
    """Strain values (N, 6) sampled on a strictly increasing grid from 0 to L0"""

    grid: FloatArray
    values: FloatArray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2:
            raise ShapeMismatch(f"Grid must be 1-D with at least 2 nodes, got shape {grid.shape}")
        if values.shape != (grid.size, STRAIN_DIM):
            raise LengthMismatch(
                f"Strain values shape {values.shape} does not match grid of {grid.size} nodes"
            )
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise OutOfRange("Grid must start at 0 and be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: npt.ArrayLike, strain: StrainVector) -> "StrainField":
        grid = np.asarray(grid, dtype=np.float64)
        return cls(grid, np.tile(strain.as_array(), (grid.size, 1)))

    @classmethod
    def rest(cls, props: RodProperties) -> "StrainField":
        return cls.constant(props.grid(), props.rest_strain)

    @property
    def length(self) -> float:
        return float(self.grid[-1])

    @property
    def kappa(self) -> FloatArray:
        return self.values[:, :3]

    @property
    def nu(self) -> FloatArray:
        return self.values[:, 3:]


@dataclass(frozen=True)
class MeasurementSet:
    """Marker arc-lengths with measured rotations (M, 3, 3) and positions (M, 3)"""

    arc_lengths: FloatArray
    rotations: FloatArray
    positions: FloatArray

    def __post_init__(self) -> None:
        arc = np.asarray(self.arc_lengths, dtype=np.float64).reshape(-1)
        rotations = np.asarray(self.rotations, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        if arc.size < 1:
            raise LengthMismatch("A measurement set needs at least one marker")
        if rotations.shape != (arc.size, 3, 3) or positions.shape != (arc.size, 3):
            raise ShapeMismatch(
                f"Expected {arc.size} rotations and positions, got {rotations.shape} and {positions.shape}"
            )
        if arc[0] <= 0 or np.any(np.diff(arc) <= 0):
            raise OutOfRange("Marker arc-lengths must be positive and strictly increasing")
        object.__setattr__(self, "arc_lengths", arc)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_markers(cls, markers: Sequence[Tuple[float, Pose]]) -> "MeasurementSet":
        return cls(
            np.array([s for s, _ in markers]),
            np.stack([pose.rotation for _, pose in markers]),
            np.stack([pose.position for _, pose in markers]),
        )

    @property
    def count(self) -> int:
        return int(self.arc_lengths.size)

    @property
    def markers(self) -> List[Tuple[float, Pose]]:
        return [
            (float(s), Pose(r, x))
            for s, r, x in zip(self.arc_lengths, self.rotations, self.positions)
        ]

    def check_layout(self, length: float) -> None:
        check_marker_layout(self.arc_lengths, length)


def check_marker_layout(arc_lengths: npt.ArrayLike, length: float) -> FloatArray:
    """Marker arc-lengths must be positive, strictly increasing and end at the tip"""
    arc = np.atleast_1d(np.asarray(arc_lengths, dtype=np.float64))
    if arc.size < 1:
        raise LengthMismatch("At least one marker is required")
    if arc[0] <= 0 or np.any(np.diff(arc) <= 0):
        raise OutOfRange("Marker arc-lengths must be positive and strictly increasing")
    if abs(arc[-1] - length) > NODE_TOL * length:
        raise OutOfRange(f"Last marker at s={arc[-1]} must coincide with the tip L0={length}")
    return arc


def trapezoid_weights(grid: npt.ArrayLike) -> FloatArray:
    grid = np.asarray(grid, dtype=np.float64)
    h = np.diff(grid)
    weights = np.zeros_like(grid)
    weights[:-1] += 0.5 * h
    weights[1:] += 0.5 * h
    return weights


@dataclass(frozen=True)
class MarkerPlan:
    """Where each marker arc-length falls on the grid

    `segment[m]` is the node the marker integrates from, `offset[m]` the
    partial step from that node, and `on_node[m]` is set when the marker
    coincides with a node (offset is then zero and no partial step is taken).
    """

    segment: npt.NDArray[np.int64]
    offset: FloatArray
    on_node: npt.NDArray[np.bool_]

    @classmethod
    def build(cls, grid: npt.ArrayLike, arc_lengths: npt.ArrayLike) -> "MarkerPlan":
        grid = np.asarray(grid, dtype=np.float64)
        arc = np.atleast_1d(np.asarray(arc_lengths, dtype=np.float64))
        length = grid[-1]
        tol = NODE_TOL * length
        if np.any(arc < -tol) or np.any(arc > length + tol):
            raise OutOfRange(f"Arc-lengths must lie in [0, {length}]")
        nearest = np.abs(grid[None, :] - arc[:, None]).argmin(axis=1)
        on_node = np.abs(grid[nearest] - arc) <= tol
        lower = np.clip(np.searchsorted(grid, arc, side="right") - 1, 0, grid.size - 2)
        segment = np.where(on_node, nearest, lower).astype(np.int64)
        offset = np.where(on_node, 0.0, arc - grid[lower])
        return cls(segment, offset, on_node)


class ReconstructionObjective:
    """Batched J = U + (eta/2) Phi and its exact gradient

    All array methods take strain values of shape (B, N, 6) on the rod grid
    and measurements as rotations (B, M, 3, 3) and positions (B, M, 3)
    sharing the arc-lengths given at construction.
    """

    def __init__(
        self,
        props: RodProperties,
        base: Pose,
        arc_lengths: npt.ArrayLike,
        eta: float,
        grid: Optional[npt.ArrayLike] = None,
    ):
        if eta <= 0:
            raise OutOfRange(f"Regularisation eta must be positive, got {eta}")
        self.props = props
        self.base = base
        self.eta = float(eta)
        self.grid = props.grid() if grid is None else np.asarray(grid, dtype=np.float64)
        if abs(self.grid[-1] - props.length) > NODE_TOL * props.length:
            raise OutOfRange(f"Grid ends at {self.grid[-1]}, rod length is {props.length}")
        self.arc_lengths = np.atleast_1d(np.asarray(arc_lengths, dtype=np.float64))
        self.plan = MarkerPlan.build(self.grid, self.arc_lengths)
        self.steps = np.diff(self.grid)
        self.weights = trapezoid_weights(self.grid)
        self.stiffness = props.stiffness_profile(self.grid)
        self.rest = props.rest_strain.as_array()

    @property
    def n_markers(self) -> int:
        return int(self.arc_lengths.size)

    # -- forward pieces -------------------------------------------------

    def _check(self, values: FloatArray) -> FloatArray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1:] != (self.grid.size, STRAIN_DIM):
            raise ShapeMismatch(
                f"Expected strain values (B, {self.grid.size}, 6), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteStrain("Strain field contains non-finite entries")
        return values

    def _segments(self, values: FloatArray) -> Tuple[FloatArray, FloatArray]:
        mid = 0.5 * (values[:, :-1] + values[:, 1:])
        h = self.steps[None, :, None]
        return h * mid[..., :3], h * mid[..., 3:]

    def integrate(self, values: FloatArray) -> Tuple[FloatArray, FloatArray, Tape]:
        """Node rotations (B, N, 3, 3) and positions (B, N, 3), plus the tape for reverse mode"""
        values = self._check(values)
        batch = values.shape[0]
        phi, u = self._segments(values)
        seg_r, seg_p = se3_exp(phi, u)

        n = self.grid.size
        rot = np.empty((batch, n, 3, 3))
        pos = np.empty((batch, n, 3))
        rot[:, 0] = self.base.rotation
        pos[:, 0] = self.base.position
        for k in range(n - 1):
            rot[:, k + 1] = rot[:, k] @ seg_r[:, k]
            pos[:, k + 1] = pos[:, k] + np.einsum("bij,bj->bi", rot[:, k], seg_p[:, k])
        tape = {"values": values, "phi": phi, "u": u, "seg_r": seg_r, "seg_p": seg_p}
        return rot, pos, tape

    def marker_poses(
        self, rot: FloatArray, pos: FloatArray, tape: Tape
    ) -> Tuple[FloatArray, FloatArray, Tape]:
        """Poses (B, M, ...) at the marker arc-lengths"""
        plan = self.plan
        seg = plan.segment
        seg_index = np.minimum(seg, self.grid.size - 2)
        delta = plan.offset[None, :, None]
        values = tape["values"]
        mid = 0.5 * (values[:, seg_index] + values[:, seg_index + 1])
        phi_m, u_m = delta * mid[..., :3], delta * mid[..., 3:]
        part_r, part_p = se3_exp(phi_m, u_m)

        base_r = rot[:, seg]
        base_x = pos[:, seg]
        m_rot = base_r @ part_r
        m_pos = base_x + np.einsum("bmij,bmj->bmi", base_r, part_p)
        on = plan.on_node[None, :]
        m_rot = np.where(on[..., None, None], base_r, m_rot)
        m_pos = np.where(on[..., None], base_x, m_pos)
        tape.update(phi_m=phi_m, u_m=u_m, part_r=part_r, part_p=part_p, seg_index=seg_index)
        return m_rot, m_pos, tape

    def markers(self, values: FloatArray) -> Tuple[FloatArray, FloatArray]:
        """Marker rotations (B, M, 3, 3) and positions (B, M, 3) of strain fields (B, N, 6)"""
        rot, pos, tape = self.integrate(values)
        m_rot, m_pos, _ = self.marker_poses(rot, pos, tape)
        return m_rot, m_pos

    def energy(self, values: FloatArray) -> FloatArray:
        diff = values - self.rest
        return 0.5 * np.einsum("n,bni->b", self.weights, self.stiffness * diff * diff)

    def energy_gradient(self, values: FloatArray) -> FloatArray:
        return self.weights[None, :, None] * self.stiffness[None] * (values - self.rest)

    def mismatch(
        self, m_rot: FloatArray, m_pos: FloatArray, meas_rot: FloatArray, meas_pos: FloatArray
    ) -> FloatArray:
        dx = m_pos - meas_pos
        dq = m_rot - meas_rot
        length2 = self.props.length**2
        return np.sum(dx * dx, axis=(1, 2)) / length2 + np.sum(dq * dq, axis=(1, 2, 3)) / 8.0

    # -- public batched API ---------------------------------------------

    def evaluate(
        self, values: FloatArray, meas_rot: FloatArray, meas_pos: FloatArray
    ) -> Tuple[FloatArray, FloatArray, FloatArray]:
        """(J, U, Phi), each of shape (B,)"""
        rot, pos, tape = self.integrate(values)
        m_rot, m_pos, _ = self.marker_poses(rot, pos, tape)
        energy = self.energy(tape["values"])
        phi = self.mismatch(m_rot, m_pos, meas_rot, meas_pos)
        return energy + 0.5 * self.eta * phi, energy, phi

    def evaluate_with_gradient(
        self, values: FloatArray, meas_rot: FloatArray, meas_pos: FloatArray
    ) -> Tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        """(J, dJ/dvalues, U, Phi); the gradient has the shape of `values`"""
        rot, pos, tape = self.integrate(values)
        m_rot, m_pos, tape = self.marker_poses(rot, pos, tape)
        values = tape["values"]
        energy = self.energy(values)
        phi = self.mismatch(m_rot, m_pos, meas_rot, meas_pos)

        scale = 0.5 * self.eta
        m_pos_bar = scale * 2.0 * (m_pos - meas_pos) / self.props.length**2
        m_rot_bar = scale * (m_rot - meas_rot) / 4.0
        grad = self.energy_gradient(values) + self._pullback(rot, tape, m_rot_bar, m_pos_bar)
        return energy + scale * phi, grad, energy, phi

    def _pullback(
        self, rot: FloatArray, tape: Tape, m_rot_bar: FloatArray, m_pos_bar: FloatArray
    ) -> FloatArray:
        """Reverse accumulation of marker-pose cotangents down to nodal strains"""
        batch, n = rot.shape[0], self.grid.size
        plan = self.plan
        rot_bar = np.zeros_like(rot)
        pos_bar = np.zeros((batch, n, 3))
        seg_bar = np.zeros((batch, n - 1, STRAIN_DIM))

        part_phi_bar, part_u_bar = se3_exp_vjp(
            tape["phi_m"],
            tape["u_m"],
            np.einsum("bmji,bmjk->bmik", rot[:, plan.segment], m_rot_bar),
            np.einsum("bmji,bmj->bmi", rot[:, plan.segment], m_pos_bar),
        )
        for m in range(plan.segment.size):
            node = plan.segment[m]
            pos_bar[:, node] += m_pos_bar[:, m]
            if plan.on_node[m]:
                rot_bar[:, node] += m_rot_bar[:, m]
                continue
            rot_bar[:, node] += m_rot_bar[:, m] @ np.swapaxes(tape["part_r"][:, m], -1, -2)
            rot_bar[:, node] += m_pos_bar[:, m, :, None] * tape["part_p"][:, m, None, :]
            delta = plan.offset[m]
            seg_bar[:, node, :3] += delta * part_phi_bar[:, m]
            seg_bar[:, node, 3:] += delta * part_u_bar[:, m]

        seg_r, seg_p = tape["seg_r"], tape["seg_p"]
        seg_r_bar = np.empty_like(seg_r)
        seg_p_bar = np.empty_like(seg_p)
        for k in range(n - 2, -1, -1):
            rt = np.swapaxes(rot[:, k], -1, -2)
            seg_r_bar[:, k] = rt @ rot_bar[:, k + 1]
            seg_p_bar[:, k] = np.einsum("bij,bj->bi", rt, pos_bar[:, k + 1])
            rot_bar[:, k] += rot_bar[:, k + 1] @ np.swapaxes(seg_r[:, k], -1, -2)
            rot_bar[:, k] += pos_bar[:, k + 1, :, None] * seg_p[:, k, None, :]
            pos_bar[:, k] += pos_bar[:, k + 1]

        phi_bar, u_bar = se3_exp_vjp(tape["phi"], tape["u"], seg_r_bar, seg_p_bar)
        h = self.steps[None, :, None]
        seg_bar[..., :3] += h * phi_bar
        seg_bar[..., 3:] += h * u_bar

        grad = np.zeros((batch, n, STRAIN_DIM))
        grad[:, :-1] += 0.5 * seg_bar
        grad[:, 1:] += 0.5 * seg_bar
        return grad


def _poses_from_arrays(rot: FloatArray, pos: FloatArray) -> List[Pose]:
    return [Pose(r, x) for r, x in zip(rot, pos)]


def integrate_kinematics(strain: StrainField, base: Pose) -> List[Pose]:
    """Pose at every grid node, starting from `base`"""
    props = RodProperties(length=strain.length, n_nodes=strain.grid.size)
    kernel = ReconstructionObjective(props, base, [strain.length], eta=1.0, grid=strain.grid)
    rot, pos, _ = kernel.integrate(strain.values[None])
    return _poses_from_arrays(rot[0], pos[0])


def interpolate_pose(poses: Sequence[Pose], strain: StrainField, s_query: float) -> Pose:
    """Pose at an arbitrary arc-length: the node pose, or one partial step past the lower node"""
    grid = strain.grid
    if len(poses) != grid.size:
        raise LengthMismatch(f"{len(poses)} poses for a grid of {grid.size} nodes")
    plan = MarkerPlan.build(grid, [s_query])
    node = int(plan.segment[0])
    if plan.on_node[0]:
        return poses[node]
    mid = 0.5 * (strain.values[node] + strain.values[node + 1])
    delta = plan.offset[0]
    part_r, part_p = se3_exp(delta * mid[:3], delta * mid[3:])
    lower = poses[node]
    return Pose(lower.rotation @ part_r, lower.position + lower.rotation @ part_p)


def potential_energy(strain: StrainField, props: RodProperties) -> float:
    """Trapezoid-rule linear-elastic energy relative to the rest strain (joules)"""
    diff = strain.values - props.rest_strain.as_array()
    stiffness = props.stiffness_profile(strain.grid)
    return float(0.5 * trapezoid_weights(strain.grid) @ np.sum(stiffness * diff * diff, axis=1))


def mismatch_cost(
    poses: Sequence[Pose], strain: StrainField, meas: MeasurementSet, length: float
) -> float:
    """Sum over markers of the pose mismatch between interpolated and measured poses"""
    total = 0.0
    for s, measured in meas.markers:
        total += pose_mismatch(interpolate_pose(poses, strain, s), measured, length)
    return total


def _kernel_for(
    strain: StrainField, base: Pose, meas: MeasurementSet, props: RodProperties, eta: float
) -> ReconstructionObjective:
    meas.check_layout(props.length)
    return ReconstructionObjective(props, base, meas.arc_lengths, eta, grid=strain.grid)


def objective(
    strain: StrainField, base: Pose, meas: MeasurementSet, props: RodProperties, eta: float
) -> float:
    """J = U + (eta/2) Phi after one kinematic integration"""
    kernel = _kernel_for(strain, base, meas, props, eta)
    value, _, _ = kernel.evaluate(strain.values[None], meas.rotations[None], meas.positions[None])
    return float(value[0])


def objective_gradient(
    strain: StrainField, base: Pose, meas: MeasurementSet, props: RodProperties, eta: float
) -> FloatArray:
    """dJ/d(strain values), shape (N, 6)"""
    kernel = _kernel_for(strain, base, meas, props, eta)
    _, grad, _, _ = kernel.evaluate_with_gradient(
        strain.values[None], meas.rotations[None], meas.positions[None]
    )
    return grad[0]
