"""
softarm-recon

Shape reconstruction of soft continuum arms from sparse marker poses.
A Cosserat rod model turns strain fields into postures; a per-strain PCA
basis compresses the strain space; a small perceptron trained without
labels on the physics-informed objective maps marker poses to basis
coefficients in real time.

This package provides:
- Exact SE(3) kinematics and the reconstruction objective with its gradient
- Surrogate data generation, dimension reduction and noisy marker sampling
- Unsupervised network training, inference and a direct baseline solver
- Versioned artifact files and a command-line pipeline with replay harness
"""

from .__version__ import (
    ARTIFACT_FORMAT_VERSION,
    PACKAGE_DESCRIPTION,
    PACKAGE_NAME,
    __version__,
    __version_info__,
)
from .config.settings import Settings, SettingsManager, setup_logging
from .geom import Pose, Twist, compose, exp_se3, exp_so3, hat, pose_mismatch
from .rod import (
    MeasurementSet,
    RodProperties,
    StrainField,
    StrainVector,
    integrate_kinematics,
    interpolate_pose,
    mismatch_cost,
    objective,
    objective_gradient,
    potential_energy,
)

__all__ = [
    "__version__",
    "__version_info__",
    "ARTIFACT_FORMAT_VERSION",
    "PACKAGE_NAME",
    "PACKAGE_DESCRIPTION",
    "Settings",
    "SettingsManager",
    "setup_logging",
    "Pose",
    "Twist",
    "compose",
    "exp_se3",
    "exp_so3",
    "hat",
    "pose_mismatch",
    "MeasurementSet",
    "RodProperties",
    "StrainField",
    "StrainVector",
    "integrate_kinematics",
    "interpolate_pose",
    "mismatch_cost",
    "objective",
    "objective_gradient",
    "potential_energy",
]

__license__ = "MIT"
__status__ = "Production"
