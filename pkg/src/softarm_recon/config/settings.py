"""
Configuration management for softarm-recon

Handles settings from presets, JSON config files and environment variables,
and provides defaults for all configuration options. Keys carry their units
(`length_m`, `sigma_angle_rad`, `rate_hz`, ...).
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..errors import ConfigError
from ..geom import FloatArray, Pose
from ..rod import RodProperties, StrainVector

try:
    from pythonjsonlogger.json import JsonFormatter
except ImportError:  # python-json-logger < 3.1
    from pythonjsonlogger.jsonlogger import JsonFormatter

Vector3 = Tuple[float, float, float]

DEFAULT_SIGMA_POSITION_PER_LENGTH = 1e-3
DEFAULT_SIGMA_ANGLE_RAD = float(np.deg2rad(0.5))


class RodConfig(BaseModel):
    """Rod geometry and elastic weights"""
    length_m: float = Field(default=0.2, gt=0, description="Rest length L0")
    n_nodes: int = Field(default=100, ge=2, description="Arc-length grid size")
    stiffness_angular: Vector3 = Field(default=(1.0, 1.0, 1.0), description="Bending/twist weights")
    stiffness_linear: Vector3 = Field(default=(1.0, 1.0, 1.0), description="Shear/stretch weights")
    taper_ratio: float = Field(default=1.0, gt=0, le=1, description="Tip-to-base radius ratio")
    rest_kappa_per_m: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Rest curvatures/twist")
    rest_nu: Vector3 = Field(default=(0.0, 0.0, 1.0), description="Rest shears/stretch")

    @model_validator(mode="after")
    def _check_positive(self) -> "RodConfig":
        if min(self.stiffness_angular) <= 0 or min(self.stiffness_linear) <= 0:
            raise ValueError("stiffness entries must be positive")
        if self.rest_nu[2] <= 0:
            raise ValueError("rest stretch must be positive")
        return self

    def to_properties(self) -> RodProperties:
        return RodProperties(
            length=self.length_m,
            n_nodes=self.n_nodes,
            stiffness_angular=np.array(self.stiffness_angular),
            stiffness_linear=np.array(self.stiffness_linear),
            rest_strain=StrainVector(np.array(self.rest_kappa_per_m), np.array(self.rest_nu)),
            taper_ratio=self.taper_ratio,
        )


class SurrogateConfig(BaseModel):
    """Surrogate strain-trajectory generator"""
    n_trajectories: int = Field(default=27, ge=1, description="Number of trajectories")
    steps_per_trajectory: int = Field(default=100, ge=1, description="Time steps per trajectory")
    n_modes: int = Field(default=4, ge=1, description="Spatial modes per strain")
    envelope: Literal["ramp", "sinusoid"] = Field(default="ramp", description="Temporal envelope")
    amplitude_angular_per_m: Vector3 = Field(default=(12.0, 12.0, 6.0), description="Curvature/twist amplitudes")
    amplitude_linear: Vector3 = Field(default=(0.02, 0.02, 0.05), description="Shear/stretch amplitudes")

    @model_validator(mode="after")
    def _check_amplitudes(self) -> "SurrogateConfig":
        if min(self.amplitude_angular_per_m) < 0 or min(self.amplitude_linear) < 0:
            raise ValueError("amplitudes must be non-negative")
        return self


class PcaConfig(BaseModel):
    """Dimension reduction"""
    n_basis: int = Field(default=4, ge=1, description="Basis functions per strain")
    inextensible: bool = Field(default=False, description="Freeze shears and stretch at rest")
    std_floor: float = Field(default=1e-8, ge=0, description="Relative floor of the std functions")


class MarkerConfig(BaseModel):
    """Marker layout along the arm"""
    count: int = Field(default=8, ge=1, description="Number of markers")
    arc_lengths_m: Optional[List[float]] = Field(
        default=None, description="Explicit arc-lengths; evenly spaced up to L0 when omitted"
    )


class NoiseConfig(BaseModel):
    """Measurement noise injected into training and replay data"""
    sigma_position_m: Optional[float] = Field(
        default=None, ge=0, description="Per-axis position std; 1e-3 L0 when omitted"
    )
    sigma_angle_rad: float = Field(default=DEFAULT_SIGMA_ANGLE_RAD, ge=0, description="Per-axis rotation std")


class TrainConfig(BaseModel):
    """Unsupervised network training"""
    eta: float = Field(default=1e4, gt=0, description="Regularisation parameter")
    learning_rate: float = Field(default=1e-3, gt=0, description="Adam learning rate")
    lr_schedule: Literal["constant", "cosine"] = Field(default="constant", description="Per-epoch learning-rate schedule")
    lr_final: float = Field(default=1e-5, ge=0, description="Learning rate on the last epoch of the cosine schedule")
    batch_size: int = Field(default=128, ge=1, description="Mini-batch size")
    epochs: int = Field(default=100, ge=1, description="Training epochs")
    val_fraction: float = Field(default=0.2, gt=0, lt=1, description="Validation split")
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [128, 64], description="Hidden layer widths")
    n_samples: int = Field(default=100_000, ge=2, description="Training-set size K")
    restarts: int = Field(default=1, ge=1, description="Independently seeded runs; the best is kept")
    init: Literal["glorot_uniform"] = Field(default="glorot_uniform", description="Weight initialisation")

    @model_validator(mode="after")
    def _check_hidden(self) -> "TrainConfig":
        if len(self.hidden_sizes) != 2 or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must hold two positive widths")
        if self.lr_schedule == "cosine" and self.lr_final > self.learning_rate:
            raise ValueError("lr_final must not exceed learning_rate")
        return self


class SolverConfig(BaseModel):
    """Direct per-frame baseline solver"""
    max_iters: int = Field(default=10_000, ge=1)
    step_rule: Literal["fixed", "armijo"] = Field(default="armijo")
    initial_step: float = Field(default=1e-3, gt=0)
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    shrink: float = Field(default=0.5, gt=0, lt=1)
    growth: float = Field(default=2.0, ge=1, description="Step expansion after an accepted step")
    max_backtracks: int = Field(default=60, ge=1)
    gradient_tolerance: float = Field(default=1e-8, gt=0)
    warm_start: bool = Field(default=False, description="Start each frame from the previous solution")
    preconditioned: bool = Field(default=True, description="Scale the gradient by the quadrature weights")
    stall_window: int = Field(default=200, ge=0, description="Iterations compared for stall detection; 0 disables it")
    stall_tolerance: float = Field(default=1e-10, ge=0, description="Relative objective decrease over the window that counts as a stall")


class ReplayConfig(BaseModel):
    """Frame-log generation and paced replay"""
    rate_hz: float = Field(default=100.0, gt=0, description="Frame rate of generated logs; replay follows the log timestamps")
    n_frames: int = Field(default=500, ge=1)
    budget_ms: float = Field(default=10.0, gt=0, description="Per-frame latency budget")


class LoggingConfig(BaseModel):
    """Logging configuration"""
    level: str = Field(default="INFO", description="Log level")
    format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Log format"
    )
    json_format: bool = Field(default=False, alias="json", description="Emit JSON log records")
    file: Optional[str] = Field(default=None, description="Also log to this file")

    model_config = {"populate_by_name": True}


class RuntimeConfig(BaseModel):
    """Seeds and parallelism"""
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class Settings(BaseModel):
    """Complete pipeline configuration"""
    rod: RodConfig = Field(default_factory=RodConfig)
    surrogate: SurrogateConfig = Field(default_factory=SurrogateConfig)
    pca: PcaConfig = Field(default_factory=PcaConfig)
    markers: MarkerConfig = Field(default_factory=MarkerConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    replay: ReplayConfig = Field(default_factory=ReplayConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)

    @model_validator(mode="after")
    def _check_consistency(self) -> "Settings":
        length = self.rod.length_m
        arcs = self.markers.arc_lengths_m
        if arcs is not None:
            if len(arcs) != self.markers.count:
                raise ValueError(
                    f"markers.arc_lengths_m holds {len(arcs)} values but markers.count is {self.markers.count}"
                )
            if arcs[0] <= 0 or any(b <= a for a, b in zip(arcs, arcs[1:])):
                raise ValueError("markers.arc_lengths_m must be positive and strictly increasing")
            if abs(arcs[-1] - length) > 1e-12 * length:
                raise ValueError("the last marker must sit at the tip (rod.length_m)")
        if self.pca.n_basis > self.rod.n_nodes:
            raise ValueError("pca.n_basis cannot exceed rod.n_nodes")
        if self.noise.sigma_position_m is None:
            self.noise.sigma_position_m = DEFAULT_SIGMA_POSITION_PER_LENGTH * length
        return self

    def marker_arc_lengths(self) -> FloatArray:
        if self.markers.arc_lengths_m is not None:
            return np.array(self.markers.arc_lengths_m, dtype=np.float64)
        count = self.markers.count
        arcs = self.rod.length_m * np.arange(1, count + 1) / count
        arcs[-1] = self.rod.length_m
        return arcs

    def base_pose(self) -> Pose:
        return Pose.identity()

    def layer_sizes(self) -> List[int]:
        n_active = 3 if self.pca.inextensible else 6
        return [9 * self.markers.count, *self.train.hidden_sizes, n_active * self.pca.n_basis]



def _format_errors(error: ValidationError) -> Dict[str, str]:
    errors = {}
    for item in error.errors():
        field = ".".join(str(part) for part in item["loc"]) or "<root>"
        errors[field] = item["msg"]
    return errors


class SettingsManager:
    """Manages configuration loading and validation"""

    def __init__(
        self,
        config_path: Optional[str] = None,
        preset: Optional[str] = None,
        overrides: Optional[Dict[str, Dict[str, Any]]] = None,
    ):
        self.config_path = config_path
        self.preset = preset
        self.overrides = overrides or {}
        self._settings: Optional[Settings] = None

    def load_settings(self) -> Settings:
        """Load settings from preset, config file, environment and explicit overrides"""
        if self._settings is not None:
            return self._settings

        from .presets import preset_overrides

        config_data: Dict[str, Any] = {}
        if self.preset is not None:
            config_data = copy.deepcopy(preset_overrides(self.preset))

        if self.config_path is not None:
            config_data = self._merge_config(config_data, self._read_file(self.config_path))

        config_data = self._merge_config(config_data, self._get_env_overrides())
        config_data = self._merge_config(config_data, self.overrides)

        try:
            self._settings = Settings(**config_data)
        except ValidationError as e:
            raise ConfigError("Invalid configuration", _format_errors(e)) from e
        return self._settings

    def _read_file(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        return data

    def _get_env_overrides(self) -> Dict[str, Any]:
        """Get configuration overrides from environment variables"""
        env_mapping = {
            "SOFTARM_LOG_LEVEL": ("logging", "level"),
            "SOFTARM_LOG_JSON": ("logging", "json"),
            "SOFTARM_LOG_FILE": ("logging", "file"),
            "SOFTARM_SEED": ("runtime", "seed"),
            "SOFTARM_THREADS": ("runtime", "threads"),
        }

        overrides: Dict[str, Dict[str, Any]] = {}
        for env_var, (section, key) in env_mapping.items():
            value = os.getenv(env_var)
            if value is not None:
                overrides.setdefault(section, {})[key] = self._convert_env_value(value)
        return overrides

    def _convert_env_value(self, value: str) -> Any:
        """Convert environment variable string to appropriate type"""
        if value.lower() in ("true", "false"):
            return value.lower() == "true"
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            pass
        return value

    def _merge_config(self, base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Merge configuration dictionaries section by section"""
        result = copy.deepcopy(base)
        for section, values in overrides.items():
            if isinstance(values, dict) and isinstance(result.get(section), dict):
                result[section].update(values)
            else:
                result[section] = values
        return result

    def save_settings(self, settings: Settings, path: str) -> None:
        """Save settings to a config file"""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(settings.model_dump(by_alias=True), f, indent=2, sort_keys=True)
            f.write("\n")

    def reload_settings(self) -> Settings:
        """Reload settings from file and environment"""
        self._settings = None
        return self.load_settings()


def load_settings(config_path: Optional[str] = None, preset: Optional[str] = None) -> Settings:
    return SettingsManager(config_path, preset).load_settings()


def setup_logging(logging_config: LoggingConfig, level: Optional[int] = None) -> None:
    """Setup logging configuration"""
    if level is None:
        level = getattr(logging, logging_config.level.upper(), logging.INFO)

    if logging_config.json_format:
        formatter: logging.Formatter = JsonFormatter(logging_config.format)
    else:
        formatter = logging.Formatter(logging_config.format)

    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if logging_config.file:
        handlers.append(logging.FileHandler(logging_config.file))
    for handler in handlers:
        handler.setFormatter(formatter)

    logging.basicConfig(level=level, handlers=handlers, force=True)
