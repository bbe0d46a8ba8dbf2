"""End-to-end tests of the command-line pipeline on a tiny configuration"""

import json
import logging

import pandas as pd
import pytest

from softarm_recon.cli import main, stage_seed

TINY = {
    "rod": {"length_m": 0.3, "n_nodes": 21},
    "surrogate": {"n_trajectories": 4, "steps_per_trajectory": 10, "n_modes": 2},
    "pca": {"n_basis": 2},
    "markers": {"count": 3},
    "train": {"n_samples": 64, "epochs": 2, "batch_size": 16, "hidden_sizes": [8, 6], "eta": 1e3},
    "solver": {"max_iters": 20},
    "replay": {"rate_hz": 1000.0, "n_frames": 10, "budget_ms": 1e3},
    "logging": {"level": "WARNING"},
}


def write_config(path, **sections) -> str:
    config = json.loads(json.dumps(TINY))
    for name, values in sections.items():
        config.setdefault(name, {}).update(values)
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Artifacts of one full run, shared by the tests below"""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    work = tmp_path_factory.mktemp("pipeline")
    config = write_config(work / "tiny.json")
    paths = {name: str(work / f"{name}.bin") for name in ("dataset", "basis", "training", "frames", "model")}
    paths["config"] = config
    paths["dir"] = work

    codes = [
        main(["--config", config, "simulate", "--out", paths["dataset"]]),
        main(["--config", config, "pca", "--dataset", paths["dataset"], "--out", paths["basis"]]),
        main(["--config", config, "sample", "--basis", paths["basis"], "--out", paths["training"]]),
        main(["--config", config, "sample", "--frames", "--out", paths["frames"]]),
        main(
            [
                "--config", config, "train",
                "--basis", paths["basis"],
                "--training", paths["training"],
                "--out", paths["model"],
                "--report", str(work / "train.csv"),
            ]
        ),
    ]
    yield paths, codes

    for handler in root.handlers[:]:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def model_args(paths) -> list:
    return ["--model", paths["model"], "--basis", paths["basis"], "--frames", paths["frames"]]


class TestPipeline:
    def test_stages_succeed(self, pipeline):
        _, codes = pipeline
        assert codes == [0, 0, 0, 0, 0]

    def test_train_report(self, pipeline):
        paths, _ = pipeline
        report = pd.read_csv(paths["dir"] / "train.csv")
        assert len(report) == 2
        assert "val_normalized" in report.columns

    def test_infer(self, pipeline, capsys, restore_logging):
        paths, _ = pipeline
        out = paths["dir"] / "infer.csv"
        code = main(
            ["--config", paths["config"], "infer", *model_args(paths), "--out", str(out),
             "--per-trajectory", str(paths["dir"] / "traj.csv"),
             "--centerline", str(paths["dir"] / "centerline.csv")]
        )
        assert code == 0
        table = pd.read_csv(out)
        assert len(table) == 10
        assert {"error", "tip_x", "true_tip_z"} <= set(table.columns)
        centerline = pd.read_csv(paths["dir"] / "centerline.csv")
        assert len(centerline) == 21
        assert {"kappa1", "kappa2", "kappa3", "nu1", "nu2", "nu3"} <= set(centerline.columns)
        assert (centerline["nu3"] > 0).all()
        assert centerline["s"].iloc[-1] == pytest.approx(0.3)
        assert pd.read_csv(paths["dir"] / "traj.csv")["frames"].sum() == 10
        assert capsys.readouterr().out.startswith("infer frames=10 ")

    def test_centerline_frame_out_of_range(self, pipeline, restore_logging):
        paths, _ = pipeline
        code = main(
            ["--config", paths["config"], "infer", *model_args(paths),
             "--out", str(paths["dir"] / "x.csv"),
             "--centerline", str(paths["dir"] / "c.csv"), "--centerline-frame", "50"]
        )
        assert code == 2

    def test_benchmark(self, pipeline, restore_logging):
        paths, _ = pipeline
        out = paths["dir"] / "bench.csv"
        code = main(
            ["--config", paths["config"], "benchmark", *model_args(paths), "--out", str(out),
             "--summary", str(paths["dir"] / "summary.csv"), "--limit", "3"]
        )
        assert code in (0, 4)
        assert len(pd.read_csv(out)) == 6
        assert set(pd.read_csv(paths["dir"] / "summary.csv")["method"]) == {"nn", "baseline"}

    def test_replay(self, pipeline, capsys, restore_logging):
        paths, _ = pipeline
        out = paths["dir"] / "replay.csv"
        code = main(["--config", paths["config"], "replay", *model_args(paths), "--out", str(out), "--no-realtime"])
        assert code == 0
        assert len(pd.read_csv(out)) == 10
        assert "interrupted=False" in capsys.readouterr().out

    def test_train_rerun_is_byte_identical(self, pipeline, tmp_path, restore_logging):
        paths, _ = pipeline
        outputs = []
        for name in ("a", "b"):
            model, report = tmp_path / f"{name}.bin", tmp_path / f"{name}.csv"
            code = main(
                ["--config", paths["config"], "train", "--basis", paths["basis"], "--training", paths["training"],
                 "--out", str(model), "--report", str(report)]
            )
            assert code == 0
            outputs.append((model.read_bytes(), report.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_other_basis_rejected(self, pipeline, tmp_path, restore_logging):
        paths, _ = pipeline
        dataset = str(tmp_path / "other.bin")
        basis = str(tmp_path / "other-basis.bin")
        assert main(["--config", paths["config"], "--seed", "99", "simulate", "--out", dataset]) == 0
        assert main(["--config", paths["config"], "pca", "--dataset", dataset, "--out", basis]) == 0
        code = main(
            ["--config", paths["config"], "infer", "--model", paths["model"], "--basis", basis,
             "--frames", paths["frames"], "--out", str(tmp_path / "x.csv")]
        )
        assert code == 3


class TestStages:
    def test_simulate_is_deterministic(self, tmp_path, restore_logging):
        config = write_config(tmp_path / "c.json")
        main(["--config", config, "simulate", "--out", str(tmp_path / "a.bin")])
        main(["--config", config, "simulate", "--out", str(tmp_path / "b.bin")])
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_invalid_config(self, tmp_path, capsys, restore_logging):
        config = write_config(tmp_path / "c.json", surrogate={"n_trajectories": 0})
        assert main(["--config", config, "simulate", "--out", str(tmp_path / "a.bin")]) == 2
        assert "surrogate.n_trajectories" in capsys.readouterr().err

    def test_sample_needs_basis(self, tmp_path, restore_logging):
        config = write_config(tmp_path / "c.json")
        assert main(["--config", config, "sample", "--out", str(tmp_path / "t.bin")]) == 2

    def test_missing_input(self, tmp_path, restore_logging):
        config = write_config(tmp_path / "c.json")
        code = main(["--config", config, "pca", "--dataset", str(tmp_path / "absent.bin"), "--out", "x.bin"])
        assert code == 1

    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_stage_seeds_differ(self):
        assert len({stage_seed(0, stream) for stream in range(4)}) == 4
        assert stage_seed(3, 1) == stage_seed(3, 1)


class TestConfigCommands:
    def test_show(self, capsys, restore_logging):
        assert main(["--preset", "br2", "config", "show"]) == 0
        shown = json.loads(capsys.readouterr().out)
        assert shown["rod"]["length_m"] == 0.3
        assert shown["pca"]["inextensible"] is True

    def test_validate(self, capsys, restore_logging):
        assert main(["config", "validate"]) == 0
        assert "72 -> 128 -> 64 -> 24" in capsys.readouterr().out

    def test_init(self, tmp_path, restore_logging):
        target = tmp_path / "softarm.json"
        assert main(["--preset", "octopus", "config", "init", "--out", str(target)]) == 0
        assert json.loads(target.read_text())["markers"]["count"] == 8
        assert main(["config", "init", "--out", str(target)]) == 1
        assert main(["config", "init", "--out", str(target), "--overwrite"]) == 0
