"""Full-size runs on the shipped presets (run with `pytest -m slow`)"""

from dataclasses import dataclass
from typing import List

import numpy as np
import pytest

from softarm_recon.baseline import accuracy_fraction, benchmark, speed_ratio
from softarm_recon.cli import main
from softarm_recon.config.settings import Settings, SettingsManager
from softarm_recon.datagen import FrameLog, TrainingSet, build_frame_log, build_training_set, generate_initial_dataset
from softarm_recon.net import Reconstructor
from softarm_recon.net.training import TrainReport, train
from softarm_recon.reduction import BasisSet, fit_pca
from softarm_recon.replay import run_replay

pytestmark = pytest.mark.slow

TRAIN_SEEDS = range(10)


@dataclass
class Prepared:
    settings: Settings
    basis: BasisSet
    training: TrainingSet

    @property
    def rod(self):
        return self.settings.rod.to_properties()

    def frame_log(self, seed: int, n_frames: int) -> FrameLog:
        s = self.settings
        return build_frame_log(
            s.surrogate, self.rod, s.base_pose(), s.marker_arc_lengths(), s.noise,
            seed=seed, rate_hz=s.replay.rate_hz, n_frames=n_frames,
        )

    def train(self, seed: int):
        s = self.settings
        return train(s.train, self.training, self.basis, self.rod, s.base_pose(), s.marker_arc_lengths(), seed=seed)

    def reconstructor(self, model) -> Reconstructor:
        return Reconstructor(model, self.basis, self.rod, self.settings.base_pose())


def prepare(preset: str) -> Prepared:
    settings = SettingsManager(preset=preset).load_settings()
    rod = settings.rod.to_properties()
    basis = fit_pca(
        generate_initial_dataset(settings.surrogate, rod, seed=1),
        settings.pca.n_basis,
        inextensible=settings.pca.inextensible,
    )
    training = build_training_set(
        basis, rod, settings.base_pose(), settings.marker_arc_lengths(),
        settings.train.n_samples, settings.noise, seed=2,
    )
    return Prepared(settings, basis, training)


@pytest.fixture(scope="module")
def br2() -> Prepared:
    return prepare("br2")


@pytest.fixture(scope="module")
def br2_reports(br2) -> List[tuple]:
    """(model, report) for every training seed"""
    return [br2.train(seed) for seed in TRAIN_SEEDS]


@pytest.fixture(scope="module")
def br2_reconstructor(br2, br2_reports) -> Reconstructor:
    model, _ = min(br2_reports, key=lambda run: run[1].best_val_loss)
    return br2.reconstructor(model)


@pytest.fixture(scope="module")
def br2_benchmark(br2, br2_reconstructor):
    log = br2.frame_log(seed=4, n_frames=100)
    solver = br2.settings.solver.model_copy(
        update={"max_iters": 10_000, "gradient_tolerance": 1e-8, "stall_window": 0}
    )
    return benchmark(
        log.measurements(), br2_reconstructor, br2.settings.base_pose(), br2.rod,
        br2.settings.train.eta, solver, threads=1,
    )


def test_validation_loss_drops_two_orders(br2_reports):
    reports: List[TrainReport] = [report for _, report in br2_reports]
    assert all(report.epochs == 100 for report in reports)
    passed = [r.val_normalized[-1] <= 1e-2 * r.val_normalized[0] for r in reports]
    assert sum(passed) >= 8


def test_network_is_three_orders_faster(br2_benchmark):
    assert speed_ratio(br2_benchmark) >= 1e3


def test_network_loss_close_to_baseline(br2_benchmark):
    assert accuracy_fraction(br2_benchmark, factor=10.0) >= 0.9


async def test_replay_sustains_100_hz(br2, br2_reconstructor):
    log = br2.frame_log(seed=5, n_frames=br2.settings.replay.n_frames)
    report = await run_replay(br2_reconstructor, log, br2.settings.replay, realtime=True)
    assert report.rate_hz == 100.0
    assert report.latency_percentiles()["p95"] < 10.0
    assert report.sustained


def test_octopus_tracking_error():
    octopus = prepare("octopus")
    model, _ = octopus.train(seed=0)
    reconstructor = octopus.reconstructor(model)
    log = octopus.frame_log(seed=4, n_frames=500)
    errors = np.array([reconstructor.reconstruct(log.measurement(i)).error for i in range(len(log))])
    assert errors.size == 500
    assert errors.mean() <= 2e-3
    assert np.percentile(errors, 95) <= 5e-3


def run_stages(work, seed: int = 7) -> List[str]:
    common = ["--preset", "br2", "--seed", str(seed), "--threads", "1"]
    paths = {name: str(work / name) for name in ("dataset.bin", "basis.bin", "training.bin", "frames.bin", "model.bin")}
    outputs = [*paths.values(), str(work / "train.csv"), str(work / "infer.csv"), str(work / "centerline.csv")]
    codes = [
        main([*common, "simulate", "--out", paths["dataset.bin"]]),
        main([*common, "pca", "--dataset", paths["dataset.bin"], "--out", paths["basis.bin"]]),
        main([*common, "sample", "--basis", paths["basis.bin"], "--out", paths["training.bin"]]),
        main([*common, "sample", "--frames", "--out", paths["frames.bin"]]),
        main(
            [*common, "train", "--basis", paths["basis.bin"], "--training", paths["training.bin"],
             "--out", paths["model.bin"], "--report", str(work / "train.csv"), "--epochs", "5"]
        ),
        main(
            [*common, "infer", "--model", paths["model.bin"], "--basis", paths["basis.bin"],
             "--frames", paths["frames.bin"], "--out", str(work / "infer.csv"),
             "--centerline", str(work / "centerline.csv")]
        ),
    ]
    assert codes == [0] * len(codes)
    return outputs


def test_stage_outputs_are_byte_identical(tmp_path, restore_logging):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = run_stages(tmp_path / "a")
    second = run_stages(tmp_path / "b")
    for a, b in zip(first, second):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read(), a
