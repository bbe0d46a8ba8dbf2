"""
Artifact header definitions

Every artifact file starts with a JSON header describing its kind, format
version, the float64 arrays in the payload, free-form metadata and the
sha256 hashes of the artifacts it was built from.
"""

from enum import Enum
from typing import Any, Dict, List, Literal

from pydantic import BaseModel, Field, model_validator

from ..__version__ import ARTIFACT_FORMAT_NAME, ARTIFACT_FORMAT_VERSION


class ArtifactKind(str, Enum):
    """Artifact kinds produced by the pipeline stages"""
    STRAIN_DATASET = "strain_dataset"
    BASIS_SET = "basis_set"
    TRAINING_SET = "training_set"
    MLP_MODEL = "mlp_model"
    FRAME_LOG = "frame_log"


class ArrayDescriptor(BaseModel):
    """Location of one little-endian float64 array in the payload"""
    name: str
    dtype: Literal["<f8"] = "<f8"
    shape: List[int]
    offset: int = Field(ge=0, description="Byte offset from the payload start")
    nbytes: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_size(self) -> "ArrayDescriptor":
        count = 1
        for dim in self.shape:
            if dim < 0:
                raise ValueError(f"negative dimension in {self.name}")
            count *= dim
        if count * 8 != self.nbytes:
            raise ValueError(f"array {self.name} declares {self.nbytes} bytes for shape {self.shape}")
        return self


class ArtifactHeader(BaseModel):
    """JSON header of an artifact file"""
    format: str = ARTIFACT_FORMAT_NAME
    version: int = ARTIFACT_FORMAT_VERSION
    kind: ArtifactKind
    arrays: List[ArrayDescriptor] = Field(default_factory=list)
    meta: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict, description="sha256 of input artifacts")

    def payload_size(self) -> int:
        return max((a.offset + a.nbytes for a in self.arrays), default=0)
