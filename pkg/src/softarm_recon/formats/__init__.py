"""
Artifact Formats Package

Versioned binary containers for datasets, bases, training sets, models and
frame logs, plus CSV tables for analysis outputs.
"""

from .container import MAGIC, Artifact, read_artifact, sha256_file, write_artifact
from .header import ArrayDescriptor, ArtifactHeader, ArtifactKind
from .tables import read_csv, write_csv

__all__ = [
    "MAGIC",
    "Artifact",
    "ArrayDescriptor",
    "ArtifactHeader",
    "ArtifactKind",
    "read_artifact",
    "read_csv",
    "sha256_file",
    "write_artifact",
    "write_csv",
]
