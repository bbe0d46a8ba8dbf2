"""Tests for artifact files and CSV tables"""

import hashlib
import json
import struct

import numpy as np
import pandas as pd
import pytest

from softarm_recon.errors import ChecksumMismatch, FormatVersionMismatch
from softarm_recon.formats import MAGIC, ArtifactKind, read_artifact, read_csv, sha256_file, write_artifact, write_csv
from softarm_recon.formats.artifacts import (
    load_basis,
    load_dataset,
    load_frame_log,
    load_training_set,
    save_basis,
    save_dataset,
    save_frame_log,
    save_training_set,
)
from softarm_recon.reduction import fit_pca


def write_raw(path, header: dict, payload: bytes = b"") -> None:
    body = json.dumps(header).encode("utf-8")
    path.write_bytes(MAGIC + struct.pack("<Q", len(body)) + body + payload)


class TestContainer:
    def test_round_trip(self, tmp_path):
        arrays = {"a": np.arange(6.0).reshape(2, 3), "b": np.array([np.pi])}
        path = write_artifact(tmp_path / "x.bin", ArtifactKind.STRAIN_DATASET, arrays, meta={"k": 1})
        artifact = read_artifact(path, ArtifactKind.STRAIN_DATASET)
        np.testing.assert_array_equal(artifact.arrays["a"], arrays["a"])
        np.testing.assert_array_equal(artifact.arrays["b"], arrays["b"])
        assert artifact.meta == {"k": 1}

    def test_deterministic_bytes(self, tmp_path):
        arrays = {"z": np.ones(3), "a": np.zeros((2, 2))}
        write_artifact(tmp_path / "1.bin", ArtifactKind.BASIS_SET, arrays, meta={"b": 2, "a": 1})
        write_artifact(tmp_path / "2.bin", ArtifactKind.BASIS_SET, arrays, meta={"a": 1, "b": 2})
        assert (tmp_path / "1.bin").read_bytes() == (tmp_path / "2.bin").read_bytes()

    def test_foreign_file(self, tmp_path):
        path = tmp_path / "foreign.bin"
        path.write_bytes(b"\x89PNG\r\n\x1a\n" + bytes(64))
        with pytest.raises(FormatVersionMismatch):
            read_artifact(path)

    @pytest.mark.parametrize("keep", [4, len(MAGIC) + 3, len(MAGIC) + 20])
    def test_truncated(self, tmp_path, keep):
        path = write_artifact(tmp_path / "x.bin", ArtifactKind.FRAME_LOG, {"a": np.ones(4)})
        path.write_bytes(path.read_bytes()[:keep])
        with pytest.raises(FormatVersionMismatch):
            read_artifact(path)

    def test_other_version(self, tmp_path):
        path = tmp_path / "v99.bin"
        write_raw(path, {"format": "softarm-recon", "version": 99, "kind": "frame_log", "arrays": []})
        with pytest.raises(FormatVersionMismatch) as excinfo:
            read_artifact(path)
        assert excinfo.value.data["found"] == 99

    def test_invalid_header(self, tmp_path):
        path = tmp_path / "bad.bin"
        write_raw(path, {"format": "softarm-recon", "version": 1, "kind": "unknown"})
        with pytest.raises(FormatVersionMismatch):
            read_artifact(path)

    def test_wrong_kind(self, tmp_path):
        path = write_artifact(tmp_path / "x.bin", ArtifactKind.MLP_MODEL, {"a": np.ones(2)})
        with pytest.raises(FormatVersionMismatch):
            read_artifact(path, ArtifactKind.BASIS_SET)

    def test_sha256(self, tmp_path):
        path = tmp_path / "data.bin"
        path.write_bytes(b"reconstruction")
        assert sha256_file(path) == hashlib.sha256(b"reconstruction").hexdigest()


class TestArtifacts:
    def test_dataset(self, tmp_path, dataset):
        save_dataset(tmp_path / "d.bin", dataset)
        loaded = load_dataset(tmp_path / "d.bin")
        np.testing.assert_array_equal(loaded.samples, dataset.samples)
        np.testing.assert_array_equal(loaded.trajectory, dataset.trajectory)

    def test_basis_keeps_checksum(self, tmp_path, dataset):
        basis = fit_pca(dataset, n_basis=2, inextensible=True)
        save_basis(tmp_path / "b.bin", basis)
        loaded = load_basis(tmp_path / "b.bin")
        assert loaded.active == basis.active
        assert loaded.checksum() == basis.checksum()

    def test_training_set_tied_to_basis(self, tmp_path, basis, dataset, training_set):
        path = tmp_path / "t.bin"
        save_training_set(path, training_set, basis.checksum())
        loaded = load_training_set(path, basis)
        np.testing.assert_array_equal(loaded.features, training_set.features)
        np.testing.assert_array_equal(loaded.true_coefficients, training_set.true_coefficients)
        with pytest.raises(ChecksumMismatch):
            load_training_set(path, fit_pca(dataset, n_basis=2))

    def test_frame_log(self, tmp_path, frame_log):
        save_frame_log(tmp_path / "f.bin", frame_log)
        loaded = load_frame_log(tmp_path / "f.bin")
        assert loaded.rate_hz == frame_log.rate_hz
        np.testing.assert_array_equal(loaded.features, frame_log.features)
        np.testing.assert_array_equal(loaded.true_tip, frame_log.true_tip)
        np.testing.assert_array_equal(loaded.trajectory, frame_log.trajectory)

    def test_kind_checked(self, tmp_path, dataset):
        save_dataset(tmp_path / "d.bin", dataset)
        with pytest.raises(FormatVersionMismatch):
            load_basis(tmp_path / "d.bin")


class TestTables:
    def test_csv_round_trip(self, tmp_path):
        table = pd.DataFrame({"frame": [0, 1], "error": [1.0 / 3.0, 2.5e-9]})
        path = write_csv(table, tmp_path / "out" / "table.csv")
        assert path.read_text().splitlines()[1] == "0,0.3333333333"
        loaded = read_csv(path)
        assert list(loaded.columns) == ["frame", "error"]
        assert loaded["error"][1] == pytest.approx(2.5e-9)
