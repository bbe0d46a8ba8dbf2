"""Shared fixtures: a small rod, a fitted basis and marker data built on it"""

import logging
from typing import Callable

import numpy as np
import pytest

from softarm_recon.config.settings import NoiseConfig, SurrogateConfig
from softarm_recon.datagen import build_frame_log, build_training_set, generate_initial_dataset
from softarm_recon.geom import Pose
from softarm_recon.reduction import BasisSet, StrainDataset, fit_pca
from softarm_recon.rod import RodProperties, StrainField

LENGTH = 0.3
N_NODES = 21
MARKER_S = np.array([0.1, 0.2, 0.3])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def rod() -> RodProperties:
    return RodProperties(length=LENGTH, n_nodes=N_NODES)


@pytest.fixture
def base() -> Pose:
    return Pose.identity()


@pytest.fixture
def marker_s() -> np.ndarray:
    return MARKER_S.copy()


@pytest.fixture
def surrogate_cfg() -> SurrogateConfig:
    return SurrogateConfig(
        n_trajectories=6,
        steps_per_trajectory=20,
        n_modes=3,
        envelope="sinusoid",
        amplitude_angular_per_m=(6.0, 6.0, 3.0),
        amplitude_linear=(0.02, 0.02, 0.05),
    )


@pytest.fixture
def zero_noise() -> NoiseConfig:
    return NoiseConfig(sigma_position_m=0.0, sigma_angle_rad=0.0)


@pytest.fixture
def noise() -> NoiseConfig:
    return NoiseConfig(sigma_position_m=1e-3 * LENGTH, sigma_angle_rad=float(np.deg2rad(0.5)))


@pytest.fixture
def dataset(surrogate_cfg: SurrogateConfig, rod: RodProperties) -> StrainDataset:
    return generate_initial_dataset(surrogate_cfg, rod, seed=7)


@pytest.fixture
def basis(dataset: StrainDataset) -> BasisSet:
    return fit_pca(dataset, n_basis=3)


@pytest.fixture
def training_set(basis, rod, base, marker_s, noise):
    return build_training_set(basis, rod, base, marker_s, count=96, noise=noise, seed=11)


@pytest.fixture
def frame_log(surrogate_cfg, rod, base, marker_s, noise):
    return build_frame_log(surrogate_cfg, rod, base, marker_s, noise, seed=5, rate_hz=200.0, n_frames=12)


@pytest.fixture
def smooth_field() -> Callable[[np.ndarray], np.ndarray]:
    """Smooth strain values (N, 6) as a function of the grid, with moderate bending"""

    def make(grid: np.ndarray) -> np.ndarray:
        x = grid / grid[-1]
        values = np.zeros((grid.size, 6))
        values[:, 0] = 3.0 * np.sin(2.0 * np.pi * x) + 1.0
        values[:, 1] = 2.0 * np.cos(np.pi * x)
        values[:, 2] = 1.5 * x
        values[:, 3] = 0.05 * x
        values[:, 4] = -0.02 * x * x
        values[:, 5] = 1.0 + 0.1 * np.sin(np.pi * x)
        return values

    return make


@pytest.fixture
def field_of(smooth_field):
    def make(grid: np.ndarray) -> StrainField:
        return StrainField(grid, smooth_field(grid))

    return make


@pytest.fixture
def restore_logging():
    """Put the root logger back after tests that reconfigure it"""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)
