"""Tests for surrogate datasets, marker features and training-set sampling"""

import numpy as np
import pytest

from softarm_recon.config.settings import NoiseConfig, SurrogateConfig
from softarm_recon.datagen import (
    CHUNK_SIZE,
    FrameLog,
    TrainingSet,
    build_frame_log,
    build_training_set,
    features_to_pose,
    generate_initial_dataset,
    marker_features,
    perturb_markers,
)
from softarm_recon.errors import OutOfRange, ShapeMismatch
from softarm_recon.geom import Pose, so3_exp
from softarm_recon.reduction import fit_pca, synthesize_values
from softarm_recon.rod import REST_STRAIN, ReconstructionObjective


class TestSurrogate:
    def test_zero_amplitude_is_rest(self, rod):
        cfg = SurrogateConfig(
            n_trajectories=3,
            steps_per_trajectory=5,
            amplitude_angular_per_m=(0.0, 0.0, 0.0),
            amplitude_linear=(0.0, 0.0, 0.0),
        )
        data = generate_initial_dataset(cfg, rod, seed=1)
        assert len(data) == 15
        np.testing.assert_array_equal(data.samples, np.broadcast_to(REST_STRAIN, data.samples.shape))

    def test_reproducible(self, surrogate_cfg, rod):
        a = generate_initial_dataset(surrogate_cfg, rod, seed=4)
        b = generate_initial_dataset(surrogate_cfg, rod, seed=4)
        np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(a.trajectory, b.trajectory)

    def test_seed_matters(self, surrogate_cfg, rod):
        a = generate_initial_dataset(surrogate_cfg, rod, seed=4)
        b = generate_initial_dataset(surrogate_cfg, rod, seed=5)
        assert not np.array_equal(a.samples, b.samples)

    def test_trajectory_labels(self, dataset, surrogate_cfg):
        counts = np.bincount(dataset.trajectory)
        assert counts.tolist() == [surrogate_cfg.steps_per_trajectory] * surrogate_cfg.n_trajectories

    @pytest.mark.parametrize("envelope", ["ramp", "sinusoid"])
    def test_intrinsic_dimension(self, rod, envelope):
        cfg = SurrogateConfig(n_trajectories=10, steps_per_trajectory=30, n_modes=3, envelope=envelope)
        basis = fit_pca(generate_initial_dataset(cfg, rod, seed=2), n_basis=3)
        assert np.all(basis.retained_variance >= 0.99)

    def test_stretch_stays_positive(self, rod):
        cfg = SurrogateConfig(n_trajectories=4, steps_per_trajectory=10, amplitude_linear=(0.0, 0.0, 5.0))
        data = generate_initial_dataset(cfg, rod, seed=0)
        assert np.all(data.samples[..., 5] > 0)


class TestFeatures:
    def test_identity_pose(self):
        np.testing.assert_array_equal(
            marker_features(Pose.identity()), [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        )

    def test_pose_is_recovered(self, rng):
        pose = Pose(so3_exp(rng.normal(size=3)), rng.normal(size=3))
        rebuilt = features_to_pose(marker_features(pose))
        np.testing.assert_allclose(rebuilt.rotation, pose.rotation, atol=1e-12)
        np.testing.assert_array_equal(rebuilt.position, pose.position)

    def test_wrong_length(self):
        with pytest.raises(ShapeMismatch):
            features_to_pose(np.zeros(8))


class TestNoise:
    def test_position_noise_level(self, rng):
        sigma = 3e-4
        noise = NoiseConfig(sigma_position_m=sigma, sigma_angle_rad=0.0)
        rotation = np.broadcast_to(np.eye(3), (20_000, 3, 3))
        position = np.zeros((20_000, 3))
        noisy_rot, noisy_pos = perturb_markers(rotation, position, noise, rng)
        rms = np.sqrt(np.mean(np.sum(noisy_pos**2, axis=1)))
        assert rms == pytest.approx(sigma * np.sqrt(3.0), rel=0.05)
        np.testing.assert_allclose(noisy_rot, rotation, atol=0)

    def test_rotation_noise_keeps_rotations(self, rng):
        noise = NoiseConfig(sigma_position_m=0.0, sigma_angle_rad=0.01)
        rotation = np.broadcast_to(np.eye(3), (50, 3, 3))
        noisy_rot, _ = perturb_markers(rotation, np.zeros((50, 3)), noise, rng)
        gram = np.swapaxes(noisy_rot, -1, -2) @ noisy_rot
        np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-12)
        assert np.max(np.abs(noisy_rot - rotation)) > 0


class TestTrainingSet:
    def test_zero_noise_matches_posture(self, basis, rod, base, marker_s, zero_noise):
        training = build_training_set(basis, rod, base, marker_s, count=20, noise=zero_noise, seed=3)
        kernel = ReconstructionObjective(rod, base, marker_s, eta=1.0, grid=basis.grid)
        values = synthesize_values(basis, training.true_coefficients)
        meas_rot, meas_pos = training.measurement_arrays(np.arange(len(training)))
        _, _, phi = kernel.evaluate(values, meas_rot, meas_pos)
        assert np.all(phi <= 1e-10)

    def test_shapes(self, training_set, basis, marker_s):
        assert training_set.features.shape == (96, marker_s.size, 9)
        assert training_set.true_coefficients.shape == (96, basis.n_coefficients)
        assert training_set.n_markers == marker_s.size

    def test_independent_of_thread_count(self, basis, rod, base, marker_s, noise):
        count = CHUNK_SIZE + 50
        one = build_training_set(basis, rod, base, marker_s, count, noise, seed=8, threads=1)
        many = build_training_set(basis, rod, base, marker_s, count, noise, seed=8, threads=3)
        np.testing.assert_array_equal(one.features, many.features)
        np.testing.assert_array_equal(one.true_coefficients, many.true_coefficients)

    def test_layout_checked(self, basis, rod, base, noise):
        with pytest.raises(OutOfRange):
            build_training_set(basis, rod, base, [0.1, 0.2], count=4, noise=noise, seed=0)

    def test_feature_shape_checked(self, marker_s):
        with pytest.raises(ShapeMismatch):
            TrainingSet(marker_s, np.zeros((4, marker_s.size + 1, 9)))


class TestFrameLog:
    def test_timestamps_follow_rate(self, frame_log):
        np.testing.assert_allclose(np.diff(frame_log.timestamps), 1.0 / 200.0)
        assert len(frame_log) == 12
        assert frame_log.true_tip.shape == (12, 3)

    def test_measurements(self, frame_log, marker_s):
        meas = frame_log.measurements()
        assert len(meas) == 12
        np.testing.assert_array_equal(meas[0].arc_lengths, marker_s)

    def test_zero_noise_tip_matches_last_marker(self, surrogate_cfg, rod, base, marker_s, zero_noise):
        log = build_frame_log(surrogate_cfg, rod, base, marker_s, zero_noise, seed=1, rate_hz=100.0, n_frames=5)
        np.testing.assert_allclose(log.features[:, -1, 0:3], log.true_tip, atol=1e-15)

    def test_timestamps_must_increase(self, marker_s):
        with pytest.raises(ShapeMismatch):
            FrameLog(np.array([0.0, 0.0]), marker_s, np.zeros((2, marker_s.size, 9)), rate_hz=10.0)
