"""
Configuration Package

Pipeline settings, testbed presets, environment overrides and logging setup
for softarm-recon.
"""

from .presets import PRESETS, preset_names, preset_overrides
from .settings import (
    LoggingConfig,
    MarkerConfig,
    NoiseConfig,
    PcaConfig,
    ReplayConfig,
    RodConfig,
    RuntimeConfig,
    Settings,
    SettingsManager,
    SolverConfig,
    SurrogateConfig,
    TrainConfig,
    load_settings,
    setup_logging,
)

__all__ = [
    "PRESETS",
    "preset_names",
    "preset_overrides",
    "LoggingConfig",
    "MarkerConfig",
    "NoiseConfig",
    "PcaConfig",
    "ReplayConfig",
    "RodConfig",
    "RuntimeConfig",
    "Settings",
    "SettingsManager",
    "SolverConfig",
    "SurrogateConfig",
    "TrainConfig",
    "load_settings",
    "setup_logging",
]
