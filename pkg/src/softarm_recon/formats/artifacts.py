"""
Typed save/load for the pipeline's data artifacts

Stages embed the sha256 of their input files under `inputs` and the basis
checksum under `meta`, so the chain dataset -> basis -> training set ->
model can be checked offline.
"""

from typing import Any, Dict, Optional

import numpy as np

from ..datagen import FrameLog, TrainingSet
from ..errors import ChecksumMismatch, FormatVersionMismatch
from ..reduction import BasisSet, StrainDataset
from .container import Artifact, PathLike, read_artifact, write_artifact
from .header import ArtifactKind


def _require(artifact: Artifact, *names: str) -> None:
    missing = [n for n in names if n not in artifact.arrays]
    if missing:
        raise FormatVersionMismatch(
            f"{artifact.header.kind.value} artifact is missing arrays: {', '.join(missing)}"
        )


def save_dataset(
    path: PathLike,
    data: StrainDataset,
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> None:
    write_artifact(
        path,
        ArtifactKind.STRAIN_DATASET,
        {"grid": data.grid, "samples": data.samples, "trajectory": data.trajectory},
        meta=meta,
        inputs=inputs,
    )


def load_dataset(path: PathLike) -> StrainDataset:
    artifact = read_artifact(path, ArtifactKind.STRAIN_DATASET)
    _require(artifact, "grid", "samples", "trajectory")
    arrays = artifact.arrays
    return StrainDataset(arrays["grid"], arrays["samples"], arrays["trajectory"].astype(np.int64))


_BASIS_ARRAYS = (
    "grid",
    "mean",
    "std",
    "eigenvectors",
    "eigenvalues",
    "coeff_mean",
    "coeff_std",
    "retained_variance",
)


def save_basis(
    path: PathLike,
    basis: BasisSet,
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> None:
    header_meta = dict(meta or {})
    header_meta.update(
        active=list(basis.active),
        n_basis=basis.n_basis,
        inextensible=basis.inextensible,
        checksum=basis.checksum(),
    )
    write_artifact(
        path,
        ArtifactKind.BASIS_SET,
        {name: getattr(basis, name) for name in _BASIS_ARRAYS},
        meta=header_meta,
        inputs=inputs,
    )


def load_basis(path: PathLike) -> BasisSet:
    artifact = read_artifact(path, ArtifactKind.BASIS_SET)
    _require(artifact, *_BASIS_ARRAYS)
    active = tuple(int(i) for i in artifact.meta.get("active", range(6)))
    basis = BasisSet(active=active, **{name: artifact.arrays[name] for name in _BASIS_ARRAYS})
    stored = artifact.meta.get("checksum")
    if stored is not None and stored != basis.checksum():
        raise ChecksumMismatch(f"Basis file {path} does not match its recorded checksum")
    return basis


def save_training_set(
    path: PathLike,
    training: TrainingSet,
    basis_checksum: str,
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> None:
    arrays = {"marker_s": training.marker_s, "features": training.features}
    if training.true_coefficients is not None:
        arrays["true_coefficients"] = training.true_coefficients
    header_meta = dict(meta or {})
    header_meta["basis_checksum"] = basis_checksum
    write_artifact(path, ArtifactKind.TRAINING_SET, arrays, meta=header_meta, inputs=inputs)


def load_training_set(path: PathLike, basis: Optional[BasisSet] = None) -> TrainingSet:
    """Load a training set; with `basis` given, its checksum must match the recorded one"""
    artifact = read_artifact(path, ArtifactKind.TRAINING_SET)
    _require(artifact, "marker_s", "features")
    if basis is not None and artifact.meta.get("basis_checksum") != basis.checksum():
        raise ChecksumMismatch(f"Training set {path} was sampled from a different basis")
    return TrainingSet(
        artifact.arrays["marker_s"],
        artifact.arrays["features"],
        artifact.arrays.get("true_coefficients"),
    )


def save_frame_log(
    path: PathLike,
    log: FrameLog,
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> None:
    arrays = {"timestamps": log.timestamps, "marker_s": log.marker_s, "features": log.features}
    if log.true_tip is not None:
        arrays["true_tip"] = log.true_tip
    if log.trajectory is not None:
        arrays["trajectory"] = log.trajectory
    header_meta = dict(meta or {})
    header_meta["rate_hz"] = log.rate_hz
    write_artifact(path, ArtifactKind.FRAME_LOG, arrays, meta=header_meta, inputs=inputs)


def load_frame_log(path: PathLike) -> FrameLog:
    artifact = read_artifact(path, ArtifactKind.FRAME_LOG)
    _require(artifact, "timestamps", "marker_s", "features")
    trajectory = artifact.arrays.get("trajectory")
    return FrameLog(
        artifact.arrays["timestamps"],
        artifact.arrays["marker_s"],
        artifact.arrays["features"],
        float(artifact.meta.get("rate_hz", 100.0)),
        artifact.arrays.get("true_tip"),
        None if trajectory is None else trajectory.astype(np.int64),
    )
