"""Version information for softarm-recon"""

__version__ = "1.0.0"
__version_info__ = tuple(map(int, __version__.split(".")))

# Version components
MAJOR = 1
MINOR = 0
PATCH = 0

# Compatibility information
MIN_PYTHON_VERSION = (3, 9)
ARTIFACT_FORMAT_NAME = "softarm-recon"
ARTIFACT_FORMAT_VERSION = 1

# Package metadata
PACKAGE_NAME = "softarm-recon"
PACKAGE_DESCRIPTION = "Physics-informed shape reconstruction of soft continuum arms from marker poses"
PACKAGE_LICENSE = "MIT"
