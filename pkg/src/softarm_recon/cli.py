#!/usr/bin/env python3
"""
Command Line Interface for softarm-recon

Runs the reconstruction pipeline stage by stage: surrogate simulation, PCA,
training-set sampling, unsupervised training, inference, the baseline
benchmark and paced replay, plus configuration management. Every stage
prints one machine-parsable `key=value` summary line on stdout.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .__version__ import ARTIFACT_FORMAT_VERSION, __version__
from .baseline import benchmark_async, check_converged, speed_ratio, summarize
from .config.presets import preset_names
from .config.settings import Settings, SettingsManager, setup_logging
from .datagen import build_frame_log, build_training_set, generate_initial_dataset
from .errors import ConfigError, LengthMismatch, NotConverged, SoftArmError
from .formats.artifacts import (
    load_basis,
    load_dataset,
    load_frame_log,
    load_training_set,
    save_basis,
    save_dataset,
    save_frame_log,
    save_training_set,
)
from .formats.container import sha256_file
from .formats.tables import write_csv
from .net.inference import Reconstructor
from .net.serialization import load_model, save_model
from .net.training import train
from .reduction import fit_pca
from .rod import StrainField
from .replay import run_replay

logger = logging.getLogger(__name__)

# Independent random streams per pipeline stage, derived from one seed
SIMULATE_STREAM = 0
SAMPLE_STREAM = 1
FRAMES_STREAM = 2
TRAIN_STREAM = 3


def setup_argument_parser() -> argparse.ArgumentParser:
    """Setup command line argument parser"""
    parser = argparse.ArgumentParser(
        prog="softarm-recon",
        description="Soft continuum arm shape reconstruction from sparse marker poses",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  softarm-recon --preset br2 simulate --out run/dataset.bin
  softarm-recon --preset br2 pca --dataset run/dataset.bin --out run/basis.bin
  softarm-recon --preset br2 sample --basis run/basis.bin --out run/training.bin
  softarm-recon --preset br2 sample --frames --out run/frames.bin
  softarm-recon --preset br2 train --basis run/basis.bin --training run/training.bin --out run/model.bin
  softarm-recon --preset br2 infer --model run/model.bin --basis run/basis.bin --frames run/frames.bin --out run/tip.csv
  softarm-recon --preset br2 benchmark --model run/model.bin --basis run/basis.bin --frames run/frames.bin --out run/bench.csv
  softarm-recon --preset br2 replay --model run/model.bin --basis run/basis.bin --frames run/frames.bin --out run/replay.csv
  softarm-recon --preset octopus config show

Environment Variables:
  SOFTARM_LOG_LEVEL            Logging level (default: INFO)
  SOFTARM_LOG_JSON             Emit JSON log records (default: false)
  SOFTARM_LOG_FILE             Also log to this file
  SOFTARM_SEED                 Pipeline seed (default: 0)
  SOFTARM_THREADS              Worker threads (default: 1)

Exit codes: 0 success, 1 error, 2 configuration error,
3 checksum/format/layout error, 4 baseline did not converge (benchmark).
        """,
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"softarm-recon {__version__} (artifact format {ARTIFACT_FORMAT_VERSION})",
    )
    parser.add_argument("--config", type=str, metavar="PATH", help="Path to configuration file")
    parser.add_argument("--preset", choices=preset_names(), help="Testbed preset")
    parser.add_argument("--seed", type=int, metavar="N", help="Pipeline seed (overrides config)")
    parser.add_argument("--threads", type=int, metavar="N", help="Worker threads (overrides config)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Suppress non-error output")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    simulate = subparsers.add_parser("simulate", help="Generate the surrogate strain dataset")
    simulate.add_argument("--out", required=True, metavar="PATH", help="Dataset file to write")

    pca = subparsers.add_parser("pca", help="Fit the per-strain PCA basis")
    pca.add_argument("--dataset", required=True, metavar="PATH")
    pca.add_argument("--out", required=True, metavar="PATH", help="Basis file to write")

    sample = subparsers.add_parser(
        "sample",
        help="Sample a training set, or a held-out frame log with --frames",
    )
    sample.add_argument("--basis", metavar="PATH", help="Basis file (training sets only)")
    sample.add_argument("--frames", action="store_true", help="Write a timestamped frame log instead")
    sample.add_argument("--count", type=int, metavar="N", help="Samples or frames (overrides config)")
    sample.add_argument("--out", required=True, metavar="PATH")

    train_parser = subparsers.add_parser("train", help="Train the network without labels")
    train_parser.add_argument("--basis", required=True, metavar="PATH")
    train_parser.add_argument("--training", required=True, metavar="PATH")
    train_parser.add_argument("--out", required=True, metavar="PATH", help="Model file to write")
    train_parser.add_argument("--report", metavar="PATH", help="Per-epoch loss CSV")
    train_parser.add_argument("--epochs", type=int, metavar="N", help="Epochs (overrides config)")
    train_parser.add_argument("--restarts", type=int, metavar="R", help="Keep the best of R seeded runs")

    infer = subparsers.add_parser("infer", help="Reconstruct every frame of a frame log")
    _add_model_inputs(infer)
    infer.add_argument("--out", required=True, metavar="PATH", help="Per-frame e_t and tip CSV")
    infer.add_argument("--per-trajectory", metavar="PATH", help="Trajectory-averaged e_t CSV")
    infer.add_argument("--centerline", metavar="PATH", help="Centerline and strain profile CSV of one frame")
    infer.add_argument("--centerline-frame", type=int, default=0, metavar="INDEX")
    infer.add_argument("--limit", type=int, metavar="N", help="Only the first N frames")

    bench = subparsers.add_parser("benchmark", help="Time the network against the baseline solver")
    _add_model_inputs(bench)
    bench.add_argument("--out", required=True, metavar="PATH", help="Per-frame comparison CSV")
    bench.add_argument("--summary", metavar="PATH", help="Median/p95 summary CSV")
    bench.add_argument("--limit", type=int, default=100, metavar="N", help="Frames to compare")

    replay = subparsers.add_parser("replay", help="Replay a frame log at its nominal rate")
    _add_model_inputs(replay)
    replay.add_argument("--out", required=True, metavar="PATH", help="Per-frame latency CSV")
    replay.add_argument("--count", type=int, metavar="N", help="Frames to replay")
    replay.add_argument("--no-realtime", action="store_true", help="Do not pace frames")

    config_parser = subparsers.add_parser("config", help="Configuration management")
    config_subparsers = config_parser.add_subparsers(dest="config_action", help="Config actions")
    config_subparsers.add_parser("validate", help="Validate configuration")
    config_subparsers.add_parser("show", help="Show configuration")
    init_parser = config_subparsers.add_parser("init", help="Write the effective configuration")
    init_parser.add_argument("--out", default="config/softarm.json", metavar="PATH")
    init_parser.add_argument("--overwrite", action="store_true", help="Overwrite an existing file")

    return parser


def _add_model_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, metavar="PATH")
    parser.add_argument("--basis", required=True, metavar="PATH")
    parser.add_argument("--frames", required=True, metavar="PATH", help="Frame log file")


def stage_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1)[0])


def load_pipeline_settings(args: argparse.Namespace) -> Settings:
    overrides: Dict[str, Dict[str, Any]] = {}
    runtime = {}
    if args.seed is not None:
        runtime["seed"] = args.seed
    if args.threads is not None:
        runtime["threads"] = args.threads
    if runtime:
        overrides["runtime"] = runtime
    if getattr(args, "epochs", None) is not None:
        overrides["train"] = {"epochs": args.epochs}
    return SettingsManager(args.config, args.preset, overrides).load_settings()


def print_summary(command: str, **fields: Any) -> None:
    parts = [command]
    for key, value in fields.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    print(" ".join(parts))


def _base_meta(settings: Settings, stage: str) -> Dict[str, Any]:
    return {
        "stage": stage,
        "seed": settings.runtime.seed,
        "length_m": settings.rod.length_m,
        "n_nodes": settings.rod.n_nodes,
    }


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """Generate the surrogate strain dataset"""
    rod = settings.rod.to_properties()
    data = generate_initial_dataset(
        settings.surrogate, rod, stage_seed(settings.runtime.seed, SIMULATE_STREAM)
    )
    meta = _base_meta(settings, "simulate")
    meta["surrogate"] = settings.surrogate.model_dump()
    save_dataset(args.out, data, meta=meta)
    print_summary("simulate", samples=len(data), nodes=data.grid.size, out=args.out)
    return 0


def cmd_pca(args: argparse.Namespace, settings: Settings) -> int:
    """Fit the basis on a dataset"""
    rod = settings.rod.to_properties()
    data = load_dataset(args.dataset)
    if abs(data.grid[-1] - rod.length) > 1e-12 * rod.length:
        raise LengthMismatch(
            f"Dataset grid ends at {data.grid[-1]} m but rod.length_m is {rod.length} m"
        )
    basis = fit_pca(
        data,
        settings.pca.n_basis,
        inextensible=settings.pca.inextensible,
        std_floor=settings.pca.std_floor,
        rest=rod.rest_strain.as_array(),
    )
    save_basis(
        args.out,
        basis,
        meta=_base_meta(settings, "pca"),
        inputs={"dataset": sha256_file(args.dataset)},
    )
    retained = basis.retained_variance[list(basis.active)]
    print_summary(
        "pca",
        n_basis=basis.n_basis,
        coefficients=basis.n_coefficients,
        min_retained=float(retained.min()),
        checksum=basis.checksum()[:16],
        out=args.out,
    )
    return 0


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    """Sample a training set or a held-out frame log"""
    rod = settings.rod.to_properties()
    base = settings.base_pose()
    marker_s = settings.marker_arc_lengths()
    seed = settings.runtime.seed

    if args.frames:
        log = build_frame_log(
            settings.surrogate,
            rod,
            base,
            marker_s,
            settings.noise,
            stage_seed(seed, FRAMES_STREAM),
            rate_hz=settings.replay.rate_hz,
            n_frames=args.count or settings.replay.n_frames,
        )
        save_frame_log(args.out, log, meta=_base_meta(settings, "frames"))
        print_summary("sample", frames=len(log), markers=marker_s.size, rate_hz=log.rate_hz, out=args.out)
        return 0

    if not args.basis:
        raise ConfigError("sample needs --basis unless --frames is given", {"basis": "missing"})
    basis = load_basis(args.basis)
    training = build_training_set(
        basis,
        rod,
        base,
        marker_s,
        args.count or settings.train.n_samples,
        settings.noise,
        stage_seed(seed, SAMPLE_STREAM),
        threads=settings.runtime.threads,
    )
    meta = _base_meta(settings, "sample")
    meta["noise"] = settings.noise.model_dump()
    save_training_set(
        args.out, training, basis.checksum(), meta=meta, inputs={"basis": sha256_file(args.basis)}
    )
    print_summary("sample", samples=len(training), markers=training.n_markers, out=args.out)
    return 0


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    """Train the network on a sampled training set"""
    rod = settings.rod.to_properties()
    basis = load_basis(args.basis)
    training = load_training_set(args.training, basis)
    model, report = train(
        settings.train,
        training,
        basis,
        rod,
        settings.base_pose(),
        settings.marker_arc_lengths(),
        seed=stage_seed(settings.runtime.seed, TRAIN_STREAM),
        threads=settings.runtime.threads,
        restarts=args.restarts,
    )
    meta = _base_meta(settings, "train")
    meta.update(
        eta=settings.train.eta,
        epochs=report.epochs,
        best_epoch=report.best_epoch + 1,
        best_val_loss=report.best_val_loss,
        restart=report.restart,
    )
    save_model(
        args.out,
        model,
        meta=meta,
        inputs={"basis": sha256_file(args.basis), "training": sha256_file(args.training)},
    )
    if args.report:
        write_csv(report.to_frame(), args.report)
    print_summary(
        "train",
        epochs=report.epochs,
        best_epoch=report.best_epoch + 1,
        val_normalized_first=report.val_normalized[0],
        val_normalized_best=report.val_normalized[report.best_epoch],
        parameters=model.n_parameters,
        out=args.out,
    )
    return 0


def _reconstructor(args: argparse.Namespace, settings: Settings) -> Reconstructor:
    basis = load_basis(args.basis)
    model = load_model(args.model, basis)
    return Reconstructor(model, basis, settings.rod.to_properties(), settings.base_pose())


def cmd_infer(args: argparse.Namespace, settings: Settings) -> int:
    """Reconstruct each frame; write e_t and tip trajectories"""
    reconstructor = _reconstructor(args, settings)
    log = load_frame_log(args.frames)
    count = len(log) if args.limit is None else min(args.limit, len(log))

    rows: List[Dict[str, Any]] = []
    centerline: Optional[pd.DataFrame] = None
    for index in range(count):
        result = reconstructor.reconstruct(log.measurement(index))
        row: Dict[str, Any] = {
            "frame": index,
            "timestamp": float(log.timestamps[index]),
            "trajectory": int(log.trajectory[index]) if log.trajectory is not None else 0,
            "error": result.error,
            "tip_x": result.tip[0],
            "tip_y": result.tip[1],
            "tip_z": result.tip[2],
        }
        if log.true_tip is not None:
            row.update(
                true_tip_x=log.true_tip[index, 0],
                true_tip_y=log.true_tip[index, 1],
                true_tip_z=log.true_tip[index, 2],
            )
        rows.append(row)
        if args.centerline and index == args.centerline_frame:
            centerline = centerline_table(result.strain, result.rotations, result.positions)

    table = pd.DataFrame(rows)
    write_csv(table, args.out)
    if args.per_trajectory:
        per_trajectory = (
            table.groupby("trajectory", sort=True)["error"].agg(["mean", "count"]).reset_index()
        )
        per_trajectory.columns = ["trajectory", "mean_error", "frames"]
        write_csv(per_trajectory, args.per_trajectory)
    if args.centerline:
        if centerline is None:
            raise ConfigError(
                "Centerline frame is outside the replayed range",
                {"centerline_frame": f"must be below {count}"},
            )
        write_csv(centerline, args.centerline)

    errors = table["error"].to_numpy() if count else np.zeros(0)
    print_summary(
        "infer",
        frames=count,
        mean_error=float(errors.mean()) if count else float("nan"),
        p95_error=float(np.percentile(errors, 95)) if count else float("nan"),
        out=args.out,
    )
    return 0


STRAIN_COLUMNS = ["kappa1", "kappa2", "kappa3", "nu1", "nu2", "nu3"]


def centerline_table(strain: StrainField, rotations: np.ndarray, positions: np.ndarray) -> pd.DataFrame:
    """s, x, d1, d3 and the six strains per node"""
    table = pd.DataFrame(
        {
            "s": strain.grid,
            "x": positions[:, 0],
            "y": positions[:, 1],
            "z": positions[:, 2],
            "d1_x": rotations[:, 0, 0],
            "d1_y": rotations[:, 1, 0],
            "d1_z": rotations[:, 2, 0],
            "d3_x": rotations[:, 0, 2],
            "d3_y": rotations[:, 1, 2],
            "d3_z": rotations[:, 2, 2],
        }
    )
    for column, values in zip(STRAIN_COLUMNS, strain.values.T):
        table[column] = values
    return table


async def cmd_benchmark(args: argparse.Namespace, settings: Settings) -> int:
    """Compare network inference with the baseline solver"""
    reconstructor = _reconstructor(args, settings)
    log = load_frame_log(args.frames)
    frames = [log.measurement(i) for i in range(min(args.limit, len(log)))]
    table = await benchmark_async(
        frames,
        reconstructor,
        settings.base_pose(),
        settings.rod.to_properties(),
        settings.train.eta,
        settings.solver,
        threads=settings.runtime.threads,
    )
    write_csv(table, args.out)
    summary = summarize(table)
    if args.summary:
        write_csv(summary, args.summary)

    fields: Dict[str, Any] = {"frames": len(frames)}
    if frames:
        fields["speed_ratio"] = speed_ratio(table)
        by_method = summary.set_index("method")
        fields["nn_loss_median"] = float(by_method.loc["nn", "loss_median"])
        fields["baseline_loss_median"] = float(by_method.loc["baseline", "loss_median"])
    fields["out"] = args.out
    print_summary("benchmark", **fields)
    check_converged(table)
    return 0


async def cmd_replay(args: argparse.Namespace, settings: Settings) -> int:
    """Replay a frame log through inference at its nominal rate"""
    reconstructor = _reconstructor(args, settings)
    log = load_frame_log(args.frames)
    report = await run_replay(
        reconstructor,
        log,
        settings.replay,
        realtime=not args.no_realtime,
        n_frames=args.count,
    )
    write_csv(report.frames, args.out)
    latency = report.latency_percentiles()
    print_summary(
        "replay",
        frames=len(report.frames),
        p50_ms=latency["p50"],
        p95_ms=latency["p95"],
        missed=report.missed,
        sustained=report.sustained,
        mean_error=float(report.frames["error"].mean()) if len(report.frames) else float("nan"),
        interrupted=report.interrupted,
        out=args.out,
    )
    return 0


def cmd_config_validate(args: argparse.Namespace, settings: Settings) -> int:
    """Validate configuration"""
    print("Validating configuration...")
    print(f"✅ Rod: L0={settings.rod.length_m} m, {settings.rod.n_nodes} nodes")
    print(f"✅ Markers: {settings.marker_arc_lengths().tolist()}")
    print(f"✅ Network: {' -> '.join(str(n) for n in settings.layer_sizes())}")
    print("✅ All configuration is valid")
    return 0


def cmd_config_show(args: argparse.Namespace, settings: Settings) -> int:
    """Show current configuration"""
    print(json.dumps(settings.model_dump(by_alias=True), indent=2, sort_keys=True))
    return 0


def cmd_config_init(args: argparse.Namespace, settings: Settings) -> int:
    """Write the effective configuration to a file"""
    target = Path(args.out)
    if target.exists() and not args.overwrite:
        print(f"Configuration file already exists: {target}")
        print("Use --overwrite to replace it")
        return 1
    SettingsManager().save_settings(settings, str(target))
    print(f"✅ Created configuration file: {target}")
    return 0


async def async_main(argv: Optional[List[str]] = None) -> int:
    """Async main function"""
    parser = setup_argument_parser()
    args = parser.parse_args(argv)

    if args.command is None or (args.command == "config" and args.config_action is None):
        parser.print_help()
        return 1

    settings = load_pipeline_settings(args)
    if args.verbose:
        level: Optional[int] = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    else:
        level = None
    setup_logging(settings.logging, level)
    logger.debug("Settings loaded (preset=%s, config=%s)", args.preset, args.config)

    commands = {
        "simulate": cmd_simulate,
        "pca": cmd_pca,
        "sample": cmd_sample,
        "train": cmd_train,
        "infer": cmd_infer,
    }
    if args.command in commands:
        return commands[args.command](args, settings)
    if args.command == "benchmark":
        return await cmd_benchmark(args, settings)
    if args.command == "replay":
        return await cmd_replay(args, settings)

    config_commands = {
        "validate": cmd_config_validate,
        "show": cmd_config_show,
        "init": cmd_config_init,
    }
    return config_commands[args.config_action](args, settings)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    try:
        return asyncio.run(async_main(argv))
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 130
    except NotConverged as e:
        print(f"Warning: {e}", file=sys.stderr)
        return e.exit_code
    except SoftArmError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
