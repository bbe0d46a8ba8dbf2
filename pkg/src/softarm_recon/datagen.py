"""
Surrogate strain trajectories and noisy marker training data

`generate_initial_dataset` stands in for an arm simulator: every trajectory
draws random amplitudes for smooth Legendre modes in s/L0 and sweeps them
with a temporal envelope, so the dataset has a known intrinsic dimension.
`build_training_set` expands a fitted basis into K noisy marker samples and
`build_frame_log` renders held-out trajectories as a timestamped frame log.

Random streams are split per chunk of samples with counter-based seed
sequences, so results do not depend on how many worker threads are used.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import numpy.typing as npt
from numpy.polynomial import legendre

from .config.settings import NoiseConfig, SurrogateConfig
from .errors import LengthMismatch, ShapeMismatch
from .geom import FloatArray, Pose, so3_exp
from .reduction import BasisSet, StrainDataset, sample_coefficients, synthesize_values
from .rod import MeasurementSet, ReconstructionObjective, RodProperties, check_marker_layout

logger = logging.getLogger(__name__)

FEATURE_DIM = 9
CHUNK_SIZE = 4096
MIN_STRETCH = 0.1


def marker_features(pose: Pose) -> FloatArray:
    """[x, d1, d3] of a marker pose"""
    return features_from_arrays(pose.rotation, pose.position)


def features_to_pose(features: npt.ArrayLike) -> Pose:
    rotation, position = arrays_from_features(features)
    return Pose(rotation, position)


def features_from_arrays(rotation: npt.ArrayLike, position: npt.ArrayLike) -> FloatArray:
    """Features (..., 9) from rotations (..., 3, 3) and positions (..., 3)"""
    rotation = np.asarray(rotation, dtype=np.float64)
    position = np.asarray(position, dtype=np.float64)
    return np.concatenate([position, rotation[..., :, 0], rotation[..., :, 2]], axis=-1)


def arrays_from_features(features: npt.ArrayLike) -> Tuple[FloatArray, FloatArray]:
    """Rotations and positions from features; d2 = d3 x d1, no re-orthonormalisation"""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != FEATURE_DIM:
        raise ShapeMismatch(f"Marker features must have {FEATURE_DIM} entries, got {features.shape}")
    position = features[..., 0:3]
    d1 = features[..., 3:6]
    d3 = features[..., 6:9]
    d2 = np.cross(d3, d1)
    return np.stack([d1, d2, d3], axis=-1), position.copy()


@dataclass(frozen=True)
class TrainingSet:
    """Noisy marker features (K, M, 9) at fixed arc-lengths

    `true_coefficients` are kept for diagnostics only; the training loss never reads them.
    """

    marker_s: FloatArray
    features: FloatArray
    true_coefficients: Optional[FloatArray] = None

    def __post_init__(self) -> None:
        marker_s = np.asarray(self.marker_s, dtype=np.float64)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 3 or features.shape[1:] != (marker_s.size, FEATURE_DIM):
            raise ShapeMismatch(
                f"Features must have shape (K, {marker_s.size}, {FEATURE_DIM}), got {features.shape}"
            )
        object.__setattr__(self, "marker_s", marker_s)
        object.__setattr__(self, "features", features)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_markers(self) -> int:
        return int(self.marker_s.size)

    def measurement_arrays(self, indices: npt.ArrayLike) -> Tuple[FloatArray, FloatArray]:
        return arrays_from_features(self.features[indices])

    def measurement(self, index: int) -> MeasurementSet:
        rotation, position = arrays_from_features(self.features[index])
        return MeasurementSet(self.marker_s, rotation, position)


@dataclass(frozen=True)
class FrameLog:
    """Timestamped marker features (F, M, 9), replayed at `rate_hz`

    `true_tip` holds the noise-free tip position of each frame and
    `trajectory` the surrogate trajectory the frame belongs to.
    """

    timestamps: FloatArray
    marker_s: FloatArray
    features: FloatArray
    rate_hz: float
    true_tip: Optional[FloatArray] = None
    trajectory: Optional[npt.NDArray[np.int64]] = None

    def __post_init__(self) -> None:
        timestamps = np.asarray(self.timestamps, dtype=np.float64)
        features = np.asarray(self.features, dtype=np.float64)
        if features.shape[0] != timestamps.size:
            raise LengthMismatch(f"{timestamps.size} timestamps for {features.shape[0]} frames")
        if np.any(np.diff(timestamps) <= 0):
            raise ShapeMismatch("Frame timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "marker_s", np.asarray(self.marker_s, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def measurement(self, index: int) -> MeasurementSet:
        rotation, position = arrays_from_features(self.features[index])
        return MeasurementSet(self.marker_s, rotation, position)

    def measurements(self) -> List[MeasurementSet]:
        return [self.measurement(i) for i in range(len(self))]


def _envelope(cfg: SurrogateConfig, rng: np.random.Generator) -> FloatArray:
    steps = cfg.steps_per_trajectory
    t = np.arange(1, steps + 1) / steps
    if cfg.envelope == "ramp":
        return t
    frequency = rng.uniform(0.5, 1.5)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return np.sin(2.0 * np.pi * frequency * t + phase)


def _spatial_modes(grid: FloatArray, length: float, n_modes: int) -> FloatArray:
    """Legendre polynomials P_0..P_{n-1} of 2 s/L0 - 1, shape (n_modes, N)"""
    x = 2.0 * grid / length - 1.0
    return np.stack([legendre.legval(x, np.eye(n_modes)[p]) for p in range(n_modes)])


def generate_initial_dataset(
    cfg: SurrogateConfig, rod: RodProperties, seed: int
) -> StrainDataset:
    """Flattened time steps of `cfg.n_trajectories` surrogate strain trajectories"""
    grid = rod.grid()
    modes = _spatial_modes(grid, rod.length, cfg.n_modes)
    amplitude = np.concatenate([cfg.amplitude_angular_per_m, cfg.amplitude_linear])
    decay = 1.0 / np.arange(1, cfg.n_modes + 1)
    rest = rod.rest_strain.as_array()
    rng = np.random.default_rng(seed)

    samples = []
    trajectory = []
    for index in range(cfg.n_trajectories):
        weights = rng.uniform(-1.0, 1.0, size=(6, cfg.n_modes)) * amplitude[:, None] * decay
        shape = (weights @ modes).T
        envelope = _envelope(cfg, rng)
        fields = rest + envelope[:, None, None] * shape[None]
        fields[..., 5] = np.maximum(fields[..., 5], MIN_STRETCH)
        samples.append(fields)
        trajectory.append(np.full(envelope.size, index, dtype=np.int64))

    data = StrainDataset(grid, np.concatenate(samples), np.concatenate(trajectory))
    logger.info(
        "Surrogate dataset: %d trajectories x %d steps on %d nodes",
        cfg.n_trajectories,
        cfg.steps_per_trajectory,
        grid.size,
    )
    return data


def _chunk_sequences(seed: int, n_chunks: int) -> List[np.random.SeedSequence]:
    return [np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)) for chunk in range(n_chunks)]


def perturb_markers(
    rotation: FloatArray, position: FloatArray, noise: NoiseConfig, rng: np.random.Generator
) -> Tuple[FloatArray, FloatArray]:
    """Gaussian position noise per axis and lab-frame rotation noise"""
    position = position + rng.normal(0.0, noise.sigma_position_m, size=position.shape)
    axis_angle = rng.normal(0.0, noise.sigma_angle_rad, size=position.shape)
    rotation = so3_exp(axis_angle) @ rotation
    return rotation, position


def _render_markers(
    kernel: ReconstructionObjective,
    values: FloatArray,
    noise: NoiseConfig,
    rng: np.random.Generator,
) -> FloatArray:
    m_rot, m_pos = kernel.markers(values)
    m_rot, m_pos = perturb_markers(m_rot, m_pos, noise, rng)
    return features_from_arrays(m_rot, m_pos)


def build_training_set(
    basis: BasisSet,
    rod: RodProperties,
    base: Pose,
    marker_s: npt.ArrayLike,
    count: int,
    noise: NoiseConfig,
    seed: int,
    threads: int = 1,
) -> TrainingSet:
    """Sample K coefficient vectors, integrate their postures, read noisy marker features"""
    marker_s = check_marker_layout(marker_s, rod.length)
    kernel = ReconstructionObjective(rod, base, marker_s, eta=1.0, grid=basis.grid)

    n_chunks = -(-count // CHUNK_SIZE)
    sizes = [min(CHUNK_SIZE, count - c * CHUNK_SIZE) for c in range(n_chunks)]

    def run_chunk(chunk: int) -> Tuple[FloatArray, FloatArray]:
        coeff_seq, noise_seq = _chunk_sequences(seed, n_chunks)[chunk].spawn(2)
        coeffs = sample_coefficients(basis, sizes[chunk], coeff_seq)
        values = synthesize_values(basis, coeffs)
        features = _render_markers(kernel, values, noise, np.random.default_rng(noise_seq))
        return features, coeffs

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run_chunk, range(n_chunks)))

    features = np.concatenate([f for f, _ in results])
    coeffs = np.concatenate([c for _, c in results])
    logger.info("Training set: %d samples, %d markers", count, marker_s.size)
    return TrainingSet(marker_s, features, coeffs)


def build_frame_log(
    cfg: SurrogateConfig,
    rod: RodProperties,
    base: Pose,
    marker_s: npt.ArrayLike,
    noise: NoiseConfig,
    seed: int,
    rate_hz: float,
    n_frames: Optional[int] = None,
) -> FrameLog:
    """Held-out surrogate trajectories rendered frame by frame at `rate_hz`"""
    marker_s = check_marker_layout(marker_s, rod.length)
    data = generate_initial_dataset(cfg, rod, seed)
    samples, trajectory = data.samples, data.trajectory
    if n_frames is not None:
        samples, trajectory = samples[:n_frames], trajectory[:n_frames]

    kernel = ReconstructionObjective(rod, base, marker_s, eta=1.0, grid=data.grid)
    noise_seq = np.random.SeedSequence(entropy=seed, spawn_key=(1,))
    features = _render_markers(kernel, samples, noise, np.random.default_rng(noise_seq))
    rot, pos, _ = kernel.integrate(samples)
    timestamps = np.arange(samples.shape[0]) / rate_hz
    logger.info("Frame log: %d frames at %.1f Hz", samples.shape[0], rate_hz)
    return FrameLog(timestamps, marker_s, features, rate_hz, pos[:, -1].copy(), trajectory)
