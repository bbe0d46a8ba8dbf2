"""
Shipped testbed presets

Each preset is a set of section overrides on top of the Settings defaults.
The JSON files under config/ at the repository root hold the same values.
"""

from typing import Any, Dict, List

from ..errors import ConfigError

PRESETS: Dict[str, Dict[str, Any]] = {
    # Tapered octopus-like arm tracked by 8 markers
    "octopus": {
        "rod": {"length_m": 0.2, "n_nodes": 100, "taper_ratio": 0.1},
        "surrogate": {
            "n_trajectories": 27,
            "steps_per_trajectory": 100,
            "n_modes": 4,
            "envelope": "ramp",
            "amplitude_angular_per_m": [12.0, 12.0, 6.0],
            "amplitude_linear": [0.02, 0.02, 0.05],
        },
        "pca": {"n_basis": 4, "inextensible": False},
        "markers": {"count": 8},
        "train": {"hidden_sizes": [128, 64], "n_samples": 100_000, "lr_schedule": "cosine"},
    },
    # Inextensible three-marker pneumatic arm; the soft stiffness keeps the
    # elastic energy well below the marker mismatch at eta = 1e4
    "br2": {
        "rod": {"length_m": 0.3, "n_nodes": 100, "taper_ratio": 1.0,
                "stiffness_angular": [0.1, 0.1, 0.1], "stiffness_linear": [0.1, 0.1, 0.1]},
        "surrogate": {
            "n_trajectories": 12,
            "steps_per_trajectory": 100,
            "n_modes": 3,
            "envelope": "sinusoid",
            "amplitude_angular_per_m": [8.0, 8.0, 6.0],
            "amplitude_linear": [0.0, 0.0, 0.0],
        },
        "pca": {"n_basis": 3, "inextensible": True},
        "markers": {"count": 3},
        "train": {"hidden_sizes": [32, 16], "n_samples": 20_000, "lr_schedule": "cosine"},
    },
}


def preset_names() -> List[str]:
    return sorted(PRESETS)


def preset_overrides(name: str) -> Dict[str, Any]:
    """Section overrides of a named preset"""
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"Unknown preset '{name}'", {"preset": f"must be one of {', '.join(preset_names())}"}
        ) from None
