"""
SO(3) and SE(3) primitives

Exact Lie-group operations used by the rod kinematics and the measurement
mismatch cost. Array functions accept arbitrary leading batch axes so the
rod kernels can evaluate whole grids and batches of strain fields at once;
the `Pose`/`Twist` records wrap single values for the public API.

Rotations are stored as full 3x3 matrices whose columns are the directors
d1, d2, d3.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

# Below this angle exp and the left Jacobian use their second-order series.
SMALL_ANGLE = 1e-6
# Coefficients that suffer cancellation at moderate angles ((t - sin t)/t^3 and
# the derivative coefficients) switch to a three-term series below this angle.
SERIES_ANGLE = 5e-2
ORTHONORMAL_TOL = 1e-9


def hat(v: npt.ArrayLike) -> FloatArray:
    """Map 3-vectors (..., 3) to skew-symmetric matrices (..., 3, 3)"""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(m: npt.ArrayLike) -> FloatArray:
    """Inverse of `hat`; reads the (2,1), (0,2), (1,0) entries"""
    m = np.asarray(m, dtype=np.float64)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def _norm(phi: FloatArray) -> FloatArray:
    return np.sqrt(np.sum(phi * phi, axis=-1))


def _exp_coefficients(theta: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """sin(t)/t and (1 - cos t)/t^2"""
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(t) / t)
    half = np.sin(0.5 * t) / (0.5 * t)
    b = np.where(small, 0.5 - t2 / 24.0, 0.5 * half * half)
    return a, b


def _jacobian_coefficient(theta: FloatArray) -> FloatArray:
    """(t - sin t)/t^3"""
    small = theta < SERIES_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    series = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return np.where(small, series, (t - np.sin(t)) / (t * t * t))


def _coefficient_slopes(theta: FloatArray) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """Derivatives of the three coefficients above, each divided by t"""
    small = theta < SERIES_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    t4 = t2 * t2
    s, c = np.sin(t), np.cos(t)
    da = np.where(small, -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0, (t * c - s) / t**3)
    db = np.where(
        small, -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0, (t * s - 2.0 * (1.0 - c)) / t**4
    )
    dc = np.where(
        small,
        -1.0 / 60.0 + t2 / 1260.0 - t4 / 60480.0,
        (t * (1.0 - c) - 3.0 * (t - s)) / t**5,
    )
    return da, db, dc


def _rodrigues(phi: FloatArray, alpha: FloatArray, beta: FloatArray) -> FloatArray:
    """I + alpha * hat(phi) + beta * hat(phi)^2, using hat(phi)^2 = phi phi^T - |phi|^2 I"""
    theta2 = np.sum(phi * phi, axis=-1)
    outer = phi[..., :, None] * phi[..., None, :]
    eye = np.broadcast_to(np.eye(3), outer.shape)
    square = outer - theta2[..., None, None] * eye
    return eye + alpha[..., None, None] * hat(phi) + beta[..., None, None] * square


def so3_exp(phi: npt.ArrayLike) -> FloatArray:
    """Rotation exp(hat(phi)) for rotation vectors (..., 3)"""
    phi = np.asarray(phi, dtype=np.float64)
    a, b = _exp_coefficients(_norm(phi))
    return _rodrigues(phi, a, b)


def left_jacobian(phi: npt.ArrayLike) -> FloatArray:
    """Left Jacobian V(phi) of SO(3), the translation operator of the SE(3) exponential"""
    phi = np.asarray(phi, dtype=np.float64)
    theta = _norm(phi)
    _, b = _exp_coefficients(theta)
    return _rodrigues(phi, b, _jacobian_coefficient(theta))


def se3_exp(phi: npt.ArrayLike, u: npt.ArrayLike) -> Tuple[FloatArray, FloatArray]:
    """Exponential of the twist (phi, u) already scaled by the arc step; returns (R, p)"""
    phi = np.asarray(phi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    rotation = so3_exp(phi)
    position = np.einsum("...ij,...j->...i", left_jacobian(phi), u)
    return rotation, position


def _quadratic_vjp(
    m: FloatArray,
    phi: FloatArray,
    alpha: FloatArray,
    alpha_slope: FloatArray,
    beta: FloatArray,
    beta_slope: FloatArray,
) -> FloatArray:
    """Gradient in phi of <M, I + alpha(t) hat(phi) + beta(t) hat(phi)^2>"""
    trace = np.trace(m, axis1=-2, axis2=-1)
    skew_part = vee(m - np.swapaxes(m, -1, -2))
    linear = np.sum(skew_part * phi, axis=-1)
    m_phi = np.einsum("...ij,...j->...i", m, phi)
    mt_phi = np.einsum("...ji,...j->...i", m, phi)
    quad = np.sum(phi * m_phi, axis=-1) - np.sum(phi * phi, axis=-1) * trace
    return (
        (alpha_slope * linear + beta_slope * quad)[..., None] * phi
        + alpha[..., None] * skew_part
        + beta[..., None] * (m_phi + mt_phi - 2.0 * trace[..., None] * phi)
    )


def se3_exp_vjp(
    phi: npt.ArrayLike, u: npt.ArrayLike, rotation_bar: npt.ArrayLike, position_bar: npt.ArrayLike
) -> Tuple[FloatArray, FloatArray]:
    """Pull cotangents of (R, p) = se3_exp(phi, u) back to (phi_bar, u_bar)"""
    phi = np.asarray(phi, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    rotation_bar = np.asarray(rotation_bar, dtype=np.float64)
    position_bar = np.asarray(position_bar, dtype=np.float64)
    theta = _norm(phi)
    a, b = _exp_coefficients(theta)
    c = _jacobian_coefficient(theta)
    da, db, dc = _coefficient_slopes(theta)

    jac = _rodrigues(phi, b, c)
    u_bar = np.einsum("...ji,...j->...i", jac, position_bar)
    p_outer = position_bar[..., :, None] * u[..., None, :]
    phi_bar = _quadratic_vjp(rotation_bar, phi, a, da, b, db) + _quadratic_vjp(
        p_outer, phi, b, db, c, dc
    )
    return phi_bar, u_bar


def renormalize(rotation: npt.ArrayLike) -> FloatArray:
    """Nearest proper rotation (polar factor) of each (..., 3, 3) matrix"""
    rotation = np.asarray(rotation, dtype=np.float64)
    u, _, vt = np.linalg.svd(rotation)
    det = np.linalg.det(u @ vt)
    u[..., :, 2] *= np.where(det < 0.0, -1.0, 1.0)[..., None]
    return u @ vt


def orthonormality_error(rotation: npt.ArrayLike) -> FloatArray:
    """Frobenius norm of R^T R - I"""
    rotation = np.asarray(rotation, dtype=np.float64)
    gram = np.swapaxes(rotation, -1, -2) @ rotation
    return np.linalg.norm(gram - np.eye(3), axis=(-2, -1))


def is_rotation(rotation: npt.ArrayLike, tol: float = ORTHONORMAL_TOL) -> bool:
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape[-2:] != (3, 3):
        return False
    det_ok = np.all(np.abs(np.linalg.det(rotation) - 1.0) <= tol)
    return bool(det_ok and np.all(orthonormality_error(rotation) <= tol))


@dataclass(frozen=True)
class Twist:
    """Strain-like element of se(3): angular (rad/m) and linear (per unit arc length) parts"""

    angular: FloatArray
    linear: FloatArray

    def __post_init__(self) -> None:
        angular = np.asarray(self.angular, dtype=np.float64).reshape(3)
        linear = np.asarray(self.linear, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(angular)) and np.all(np.isfinite(linear))):
            raise ValueError("Twist entries must be finite")
        object.__setattr__(self, "angular", angular)
        object.__setattr__(self, "linear", linear)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (columns d1, d2, d3) and position in meters

    Construction checks shape and finiteness only. Measured poses rebuilt from
    noisy features are slightly non-orthonormal; use `is_rotation` and
    `renormalize` where the group invariants matter.
    """

    rotation: FloatArray
    position: FloatArray

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        position = np.array(self.position, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(position))):
            raise ValueError("Pose entries must be finite")
        rotation.setflags(write=False)
        position.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "position", position)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def matrix(self) -> FloatArray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.position
        return out

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.position)


def exp_so3(omega: npt.ArrayLike, h: float) -> FloatArray:
    """Rotation after arc step h under constant angular strain omega"""
    if h < 0:
        raise ValueError(f"Arc step must be non-negative, got {h}")
    return so3_exp(h * np.asarray(omega, dtype=np.float64))


def exp_se3(twist: Twist, h: float) -> Pose:
    """Pose after arc step h under the constant strain `twist`"""
    if h < 0:
        raise ValueError(f"Arc step must be non-negative, got {h}")
    rotation, position = se3_exp(h * twist.angular, h * twist.linear)
    return Pose(rotation, position)


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.rotation, a.rotation @ b.position + a.position)


def pose_mismatch(p: Pose, m: Pose, length: float) -> float:
    """Normalised position error plus Frobenius rotation error over 8"""
    if length <= 0:
        raise ValueError(f"Reference length must be positive, got {length}")
    dx = p.position - m.position
    dq = p.rotation - m.rotation
    return float(dx @ dx / length**2 + np.sum(dq * dq) / 8.0)
