"""
Model files

The container header records the layer sizes, activation, input scaling and
the checksum of the basis the model was trained against; the payload holds
the parameters and coefficient statistics.
"""

from typing import Any, Dict, Optional

from ..errors import ChecksumMismatch, FormatVersionMismatch
from ..formats.container import PathLike, read_artifact, write_artifact
from ..formats.header import ArtifactKind
from ..reduction import BasisSet
from .model import MlpModel


def save_model(
    path: PathLike,
    model: MlpModel,
    meta: Optional[Dict[str, Any]] = None,
    inputs: Optional[Dict[str, str]] = None,
) -> None:
    arrays = {
        "marker_s": model.marker_s,
        "coeff_mean": model.coeff_mean,
        "coeff_std": model.coeff_std,
    }
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"weight_{k}"] = w
        arrays[f"bias_{k}"] = b
    header_meta = dict(meta or {})
    header_meta.update(
        layer_sizes=model.layer_sizes,
        activation=model.activation,
        position_scale_m=model.position_scale,
        inputs_normalized="positions / position_scale_m",
        basis_checksum=model.basis_checksum,
    )
    write_artifact(path, ArtifactKind.MLP_MODEL, arrays, meta=header_meta, inputs=inputs)


def load_model(path: PathLike, basis: Optional[BasisSet] = None) -> MlpModel:
    """Load a model; with `basis` given, the recorded basis checksum must match"""
    artifact = read_artifact(path, ArtifactKind.MLP_MODEL)
    meta, arrays = artifact.meta, artifact.arrays
    try:
        sizes = [int(n) for n in meta["layer_sizes"]]
        n_layers = len(sizes) - 1
        model = MlpModel(
            layer_sizes=sizes,
            weights=[arrays[f"weight_{k}"] for k in range(n_layers)],
            biases=[arrays[f"bias_{k}"] for k in range(n_layers)],
            marker_s=arrays["marker_s"],
            position_scale=float(meta["position_scale_m"]),
            coeff_mean=arrays["coeff_mean"],
            coeff_std=arrays["coeff_std"],
            basis_checksum=str(meta.get("basis_checksum", "")),
            activation=str(meta.get("activation", "silu")),
        )
    except KeyError as e:
        raise FormatVersionMismatch(f"Model file {path} is missing {e}") from e
    if basis is not None and model.basis_checksum != basis.checksum():
        raise ChecksumMismatch(
            f"Model file {path} was trained against a different basis",
            data={"model": model.basis_checksum, "basis": basis.checksum()},
        )
    return model
