"""Tests for the SO(3)/SE(3) primitives"""

import numpy as np
import pytest
from scipy.linalg import expm

from softarm_recon.geom import (
    Pose,
    Twist,
    compose,
    exp_se3,
    exp_so3,
    hat,
    is_rotation,
    left_jacobian,
    orthonormality_error,
    pose_mismatch,
    renormalize,
    se3_exp,
    se3_exp_vjp,
    so3_exp,
    vee,
)


def twist_matrix(twist: Twist, h: float) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:3, :3] = hat(h * twist.angular)
    out[:3, 3] = h * twist.linear
    return out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return so3_exp(rng.normal(size=3))


class TestHat:
    def test_zero(self):
        assert np.array_equal(hat([0.0, 0.0, 0.0]), np.zeros((3, 3)))

    def test_unit_z(self):
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        assert np.array_equal(hat([0.0, 0.0, 1.0]), expected)

    def test_cross_product(self, rng):
        v, w = rng.normal(size=(2, 3))
        np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-15)

    def test_vee_inverts_hat(self, rng):
        v = rng.normal(size=(5, 3))
        assert np.array_equal(vee(hat(v)), v)


class TestExpSO3:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(exp_so3([0.0, 0.0, 0.0], 1.0), np.eye(3), atol=0)

    def test_half_turn(self):
        np.testing.assert_allclose(exp_so3([0.0, 0.0, np.pi], 1.0), np.diag([-1.0, -1.0, 1.0]), atol=1e-12)

    @pytest.mark.parametrize("h", [1e-9, 1e-7, 0.01, 0.5, 3.0])
    def test_matches_matrix_exponential(self, h):
        omega = np.array([0.3, -0.2, 0.9])
        np.testing.assert_allclose(exp_so3(omega, h), expm(hat(h * omega)), atol=1e-12)

    @pytest.mark.parametrize("angle", [0.0, 1e-8, 1e-3, 1.0, np.pi, 10.0, 1000.0])
    def test_stays_on_the_group(self, angle):
        rotation = exp_so3(np.array([1.0, 2.0, -2.0]) / 3.0, angle)
        assert is_rotation(rotation)

    def test_negative_step_rejected(self):
        with pytest.raises(ValueError):
            exp_so3([0.0, 0.0, 1.0], -0.1)


class TestExpSE3:
    def test_pure_stretch(self):
        pose = exp_se3(Twist(np.zeros(3), np.array([0.0, 0.0, 1.0])), 0.1)
        np.testing.assert_allclose(pose.rotation, np.eye(3), atol=0)
        np.testing.assert_allclose(pose.position, [0.0, 0.0, 0.1], atol=1e-15)

    def test_constant_curvature_arc(self):
        kappa, h = 5.0, 0.2
        pose = exp_se3(Twist(np.array([kappa, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])), h)
        angle = kappa * h
        expected = [0.0, (np.cos(angle) - 1.0) / kappa, np.sin(angle) / kappa]
        np.testing.assert_allclose(pose.position, expected, atol=1e-12)

    @pytest.mark.parametrize("h", [0.0, 1e-8, 1e-4, 0.05, 0.7])
    def test_matches_matrix_exponential(self, rng, h):
        twist = Twist(rng.normal(size=3) * 4.0, rng.normal(size=3))
        pose = exp_se3(twist, h)
        np.testing.assert_allclose(pose.matrix, expm(twist_matrix(twist, h)), atol=1e-12)

    def test_one_parameter_subgroup(self, rng):
        twist = Twist(rng.normal(size=3) * 3.0, rng.normal(size=3))
        whole = exp_se3(twist, 0.7)
        split = compose(exp_se3(twist, 0.3), exp_se3(twist, 0.4))
        np.testing.assert_allclose(split.rotation, whole.rotation, atol=1e-10)
        np.testing.assert_allclose(split.position, whole.position, atol=1e-10)

    def test_batched_matches_single(self, rng):
        phi = rng.normal(size=(4, 7, 3))
        u = rng.normal(size=(4, 7, 3))
        rotation, position = se3_exp(phi, u)
        r, p = se3_exp(phi[2, 3], u[2, 3])
        np.testing.assert_allclose(rotation[2, 3], r, atol=1e-15)
        np.testing.assert_allclose(position[2, 3], p, atol=1e-15)

    def test_left_jacobian_small_angle(self):
        np.testing.assert_allclose(left_jacobian(np.zeros(3)), np.eye(3), atol=0)

    def test_twist_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Twist(np.array([np.nan, 0.0, 0.0]), np.zeros(3))


class TestVJP:
    @pytest.mark.parametrize("theta", [0.0, 1e-7, 1e-3, 0.04, 0.06, 0.5, 2.5])
    def test_matches_finite_differences(self, rng, theta):
        axis = rng.normal(size=3)
        phi = theta * axis / np.linalg.norm(axis)
        u = rng.normal(size=3)
        rotation_bar = rng.normal(size=(3, 3))
        position_bar = rng.normal(size=3)

        def f(phi_, u_):
            r, p = se3_exp(phi_, u_)
            return np.sum(rotation_bar * r) + position_bar @ p

        phi_bar, u_bar = se3_exp_vjp(phi, u, rotation_bar, position_bar)
        step = 1e-6
        eye = np.eye(3)
        fd_phi = [(f(phi + step * e, u) - f(phi - step * e, u)) / (2 * step) for e in eye]
        fd_u = [(f(phi, u + step * e) - f(phi, u - step * e)) / (2 * step) for e in eye]
        np.testing.assert_allclose(phi_bar, fd_phi, atol=1e-7)
        np.testing.assert_allclose(u_bar, fd_u, atol=1e-7)


class TestPose:
    def test_compose_is_associative(self, rng):
        a, b, c = (Pose(random_rotation(rng), rng.normal(size=3)) for _ in range(3))
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        np.testing.assert_allclose(left.matrix, right.matrix, atol=1e-12)

    def test_inverse(self, rng):
        pose = Pose(random_rotation(rng), rng.normal(size=3))
        np.testing.assert_allclose(compose(pose, pose.inverse()).matrix, np.eye(4), atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3), np.array([0.0, np.inf, 0.0]))

    def test_is_read_only(self):
        pose = Pose.identity()
        with pytest.raises(ValueError):
            pose.position[0] = 1.0

    def test_renormalize_restores_orthonormality(self, rng):
        noisy = random_rotation(rng) + 1e-3 * rng.normal(size=(3, 3))
        assert not is_rotation(noisy)
        fixed = renormalize(noisy)
        assert is_rotation(fixed)
        assert orthonormality_error(fixed) < 1e-12
        np.testing.assert_allclose(fixed, noisy, atol=1e-2)

    def test_renormalize_reflection(self):
        fixed = renormalize(np.diag([1.0, 1.0, -1.0]))
        assert np.linalg.det(fixed) == pytest.approx(1.0)


class TestPoseMismatch:
    def test_identical(self, rng):
        pose = Pose(random_rotation(rng), rng.normal(size=3))
        assert pose_mismatch(pose, pose, 0.2) == 0.0

    def test_antipodal_rotation(self, rng):
        axis = rng.normal(size=3)
        half_turn = so3_exp(np.pi * axis / np.linalg.norm(axis))
        q = random_rotation(rng)
        a = Pose(q, np.zeros(3))
        b = Pose(q @ half_turn, np.zeros(3))
        assert pose_mismatch(a, b, 0.2) == pytest.approx(1.0, abs=1e-12)

    def test_offset_of_one_length(self):
        length = 0.25
        a = Pose.identity()
        b = Pose(np.eye(3), np.array([0.0, length, 0.0]))
        assert pose_mismatch(a, b, length) == pytest.approx(1.0, abs=1e-15)

    def test_symmetric(self, rng):
        a = Pose(random_rotation(rng), rng.normal(size=3))
        b = Pose(random_rotation(rng), rng.normal(size=3))
        assert pose_mismatch(a, b, 0.3) == pytest.approx(pose_mismatch(b, a, 0.3), rel=1e-15)

    def test_non_positive_length(self):
        with pytest.raises(ValueError):
            pose_mismatch(Pose.identity(), Pose.identity(), 0.0)
