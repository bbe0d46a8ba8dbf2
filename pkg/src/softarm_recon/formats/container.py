"""
Binary artifact container

Layout: magic line, little-endian uint64 header length, UTF-8 JSON header,
then the concatenated little-endian float64 arrays. Writing is
deterministic: keys are sorted and nothing time-dependent is stored.
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError

from ..__version__ import ARTIFACT_FORMAT_NAME, ARTIFACT_FORMAT_VERSION
from ..errors import FormatVersionMismatch
from ..geom import FloatArray
from .header import ArrayDescriptor, ArtifactHeader, ArtifactKind

logger = logging.getLogger(__name__)

MAGIC = b"SOFTARM-RECON\n"
_LENGTH = struct.Struct("<Q")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Artifact:
    header: ArtifactHeader
    arrays: Dict[str, FloatArray]

    @property
    def meta(self) -> Dict[str, Any]:
        return self.header.meta


def write_artifact(
    path: PathLike,
    kind: ArtifactKind,
    arrays: Mapping[str, npt.ArrayLike],
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> Path:
    """Write arrays (converted to '<f8') with a typed header"""
    descriptors = []
    chunks = []
    offset = 0
    for name, array in arrays.items():
        data = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
        raw = data.tobytes()
        descriptors.append(
            ArrayDescriptor(name=name, shape=list(data.shape), offset=offset, nbytes=len(raw))
        )
        chunks.append(raw)
        offset += len(raw)

    header = ArtifactHeader(kind=kind, arrays=descriptors, meta=meta or {}, inputs=inputs or {})
    header_bytes = json.dumps(
        header.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as f:
        f.write(MAGIC)
        f.write(_LENGTH.pack(len(header_bytes)))
        f.write(header_bytes)
        for chunk in chunks:
            f.write(chunk)
    logger.debug("Wrote %s artifact to %s (%d bytes payload)", kind.value, target, offset)
    return target


def read_artifact(path: PathLike, kind: Optional[ArtifactKind] = None) -> Artifact:
    """Read and validate an artifact; any defect raises FormatVersionMismatch"""
    raw = Path(path).read_bytes()
    name = str(path)

    if not raw.startswith(MAGIC):
        raise FormatVersionMismatch(f"{name} is not a {ARTIFACT_FORMAT_NAME} artifact")
    start = len(MAGIC) + _LENGTH.size
    if len(raw) < start:
        raise FormatVersionMismatch(f"{name} is truncated (no header length)")
    (header_len,) = _LENGTH.unpack_from(raw, len(MAGIC))
    if len(raw) < start + header_len:
        raise FormatVersionMismatch(f"{name} is truncated (header)")

    try:
        document = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatVersionMismatch(f"{name} has an unreadable header: {e}") from e
    if not isinstance(document, dict):
        raise FormatVersionMismatch(f"{name} has an unreadable header")
    if document.get("format") != ARTIFACT_FORMAT_NAME:
        raise FormatVersionMismatch(f"{name} has foreign format {document.get('format')!r}")
    if document.get("version") != ARTIFACT_FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{name} has format version {document.get('version')}, expected {ARTIFACT_FORMAT_VERSION}",
            data={"found": document.get("version"), "expected": ARTIFACT_FORMAT_VERSION},
        )
    try:
        header = ArtifactHeader(**document)
    except ValidationError as e:
        raise FormatVersionMismatch(f"{name} has an invalid header: {e}") from e
    if kind is not None and header.kind != kind:
        raise FormatVersionMismatch(
            f"{name} holds a {header.kind.value} artifact, expected {kind.value}"
        )

    payload = raw[start + header_len :]
    if len(payload) != header.payload_size():
        raise FormatVersionMismatch(
            f"{name} payload has {len(payload)} bytes, header declares {header.payload_size()}"
        )
    arrays = {}
    for desc in header.arrays:
        data = np.frombuffer(payload, dtype="<f8", count=desc.nbytes // 8, offset=desc.offset)
        arrays[desc.name] = data.reshape(desc.shape).astype(np.float64)
    return Artifact(header, arrays)


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
