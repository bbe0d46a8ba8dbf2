"""
Direct per-frame reconstruction by gradient descent

The decision variables are the strain values at every grid node, so the
kinematic constraint holds by construction: the posture is always the
integral of the current iterate. Steps are accepted by Armijo backtracking
and grown after every accepted step. A solve also stops, unconverged, once
the objective has stopped improving over a window of iterations. The
optional preconditioner divides the nodal gradient by the trapezoid
weights, turning it into the L2(ds) gradient of the continuous objective.

`benchmark` times this solver against network inference on the same frames.
"""

import asyncio
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .config.settings import SolverConfig
from .errors import NonFiniteStrain, NotConverged
from .geom import FloatArray, Pose
from .net.inference import Reconstructor
from .rod import MeasurementSet, ReconstructionObjective, RodProperties, StrainField

logger = logging.getLogger(__name__)

BENCHMARK_COLUMNS = [
    "frame",
    "method",
    "seconds",
    "objective",
    "normalized_loss",
    "error",
    "iterations",
    "converged",
]


@dataclass(frozen=True)
class SolveResult:
    strain: StrainField
    rotations: FloatArray
    positions: FloatArray
    objective: float
    energy: float
    mismatch: float
    iterations: int
    wall_time: float
    converged: bool
    gradient_norm: float
    history: List[float] = field(default_factory=list)
    n_markers: int = 1
    stalled: bool = False

    @property
    def poses(self) -> List[Pose]:
        return [Pose(r, x) for r, x in zip(self.rotations, self.positions)]

    @property
    def error(self) -> float:
        """Per-marker mismatch"""
        return self.mismatch / self.n_markers


class _Problem:
    """One frame's objective with single-sample array plumbing"""

    def __init__(self, kernel: ReconstructionObjective, meas: MeasurementSet):
        self.kernel = kernel
        self.meas_rot = meas.rotations[None]
        self.meas_pos = meas.positions[None]

    def value(self, values: FloatArray) -> float:
        if not np.all(np.isfinite(values)) or np.any(values[:, 5] <= 0):
            return float("inf")
        try:
            objective, _, _ = self.kernel.evaluate(values[None], self.meas_rot, self.meas_pos)
        except NonFiniteStrain:
            return float("inf")
        return float(objective[0])

    def gradient(self, values: FloatArray) -> FloatArray:
        _, grad, _, _ = self.kernel.evaluate_with_gradient(values[None], self.meas_rot, self.meas_pos)
        return grad[0]


def solve(
    meas: MeasurementSet,
    base: Pose,
    props: RodProperties,
    eta: float,
    cfg: SolverConfig,
    init: Optional[StrainField] = None,
) -> SolveResult:
    """Minimise J over the nodal strain values; returns the best iterate"""
    started = time.perf_counter()
    meas.check_layout(props.length)
    grid = props.grid() if init is None else init.grid
    kernel = ReconstructionObjective(props, base, meas.arc_lengths, eta, grid=grid)
    problem = _Problem(kernel, meas)

    x = StrainField.constant(grid, props.rest_strain).values if init is None else init.values.copy()
    current = problem.value(x)
    grad = problem.gradient(x)
    scale = kernel.weights[:, None] if cfg.preconditioned else 1.0
    step = cfg.initial_step
    history = [current]
    best_x, best_value = x, current
    converged = False
    iterations = 0
    stalled = False

    for iterations in range(1, cfg.max_iters + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= cfg.gradient_tolerance:
            converged = True
            iterations -= 1
            break
        direction = -grad / scale

        if cfg.step_rule == "fixed":
            trial = x + cfg.initial_step * direction
            trial_value = problem.value(trial)
            if not np.isfinite(trial_value):
                break
        else:
            slope = float(np.sum(grad * direction))
            for _ in range(cfg.max_backtracks):
                trial = x + step * direction
                trial_value = problem.value(trial)
                if trial_value <= current + cfg.armijo_c * step * slope:
                    break
                step *= cfg.shrink
            else:
                logger.debug("Line search stalled at iteration %d (step %.3e)", iterations, step)
                break
            step *= cfg.growth

        x, current = trial, trial_value
        grad = problem.gradient(x)
        history.append(current)
        if current < best_value:
            best_x, best_value = x, current
        if cfg.stall_window and len(history) > cfg.stall_window:
            earlier = history[-1 - cfg.stall_window]
            if earlier - current <= cfg.stall_tolerance * abs(earlier):
                logger.debug("Objective stalled at iteration %d (J=%.6e)", iterations, current)
                stalled = True
                break
    else:
        converged = float(np.linalg.norm(grad)) <= cfg.gradient_tolerance

    rot, pos, tape = kernel.integrate(best_x[None])
    m_rot, m_pos, _ = kernel.marker_poses(rot, pos, tape)
    mismatch = float(kernel.mismatch(m_rot, m_pos, problem.meas_rot, problem.meas_pos)[0])
    energy = float(kernel.energy(best_x[None])[0])
    best_grad_norm = float(np.linalg.norm(problem.gradient(best_x)))
    result = SolveResult(
        strain=StrainField(grid, best_x),
        rotations=rot[0],
        positions=pos[0],
        objective=best_value,
        energy=energy,
        mismatch=mismatch,
        iterations=iterations,
        wall_time=time.perf_counter() - started,
        converged=converged and best_grad_norm <= cfg.gradient_tolerance,
        gradient_norm=best_grad_norm,
        history=history,
        n_markers=meas.count,
        stalled=stalled,
    )
    logger.debug(
        "Solve: J=%.6e after %d iterations (converged=%s, stalled=%s, |g|=%.2e)",
        result.objective,
        result.iterations,
        result.converged,
        result.stalled,
        result.gradient_norm,
    )
    return result


def solve_sequence(
    frames: Sequence[MeasurementSet],
    base: Pose,
    props: RodProperties,
    eta: float,
    cfg: SolverConfig,
) -> List[SolveResult]:
    """Solve frames in order, warm-starting from the previous solution when configured"""
    results: List[SolveResult] = []
    for meas in frames:
        init = results[-1].strain if (cfg.warm_start and results) else None
        results.append(solve(meas, base, props, eta, cfg, init=init))
    return results


def _nn_row(index: int, reconstructor: Reconstructor, meas: MeasurementSet, eta: float) -> dict:
    started = time.perf_counter()
    result = reconstructor.reconstruct(meas)
    seconds = time.perf_counter() - started
    energy = float(reconstructor.kernel.energy(result.strain.values[None])[0])
    mismatch = result.error * meas.count
    objective = energy + 0.5 * eta * mismatch
    return {
        "frame": index,
        "method": "nn",
        "seconds": seconds,
        "objective": objective,
        "normalized_loss": objective / (eta * meas.count),
        "error": result.error,
        "iterations": 0,
        "converged": True,
    }


def _baseline_row(index: int, result: SolveResult, eta: float) -> dict:
    return {
        "frame": index,
        "method": "baseline",
        "seconds": result.wall_time,
        "objective": result.objective,
        "normalized_loss": result.objective / (eta * result.n_markers),
        "error": result.error,
        "iterations": result.iterations,
        "converged": result.converged,
    }


async def benchmark_async(
    frames: Sequence[MeasurementSet],
    reconstructor: Reconstructor,
    base: Pose,
    props: RodProperties,
    eta: float,
    cfg: SolverConfig,
    threads: int = 1,
) -> pd.DataFrame:
    """Per-frame time and normalised loss of network inference and the baseline"""
    rows = [_nn_row(i, reconstructor, meas, eta) for i, meas in enumerate(frames)]

    if cfg.warm_start:
        solved = solve_sequence(frames, base, props, eta, cfg)
    else:
        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(max(1, threads))

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:

            async def solve_one(meas: MeasurementSet) -> SolveResult:
                async with semaphore:
                    return await loop.run_in_executor(
                        pool, solve, meas, base, props, eta, cfg
                    )

            solved = await asyncio.gather(*(solve_one(meas) for meas in frames))

    rows.extend(_baseline_row(i, result, eta) for i, result in enumerate(solved))
    table = pd.DataFrame(rows, columns=BENCHMARK_COLUMNS)
    return table.sort_values(["frame", "method"], kind="stable").reset_index(drop=True)


def benchmark(
    frames: Sequence[MeasurementSet],
    reconstructor: Reconstructor,
    base: Pose,
    props: RodProperties,
    eta: float,
    cfg: SolverConfig,
    threads: int = 1,
) -> pd.DataFrame:
    return asyncio.run(benchmark_async(frames, reconstructor, base, props, eta, cfg, threads))


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Median and p95 of time and normalised loss per method"""
    if table.empty:
        return pd.DataFrame(
            columns=["method", "frames", "seconds_median", "seconds_p95", "loss_median", "loss_p95", "not_converged"]
        )
    grouped = table.groupby("method", sort=True)
    summary = pd.DataFrame(
        {
            "frames": grouped["frame"].count(),
            "seconds_median": grouped["seconds"].median(),
            "seconds_p95": grouped["seconds"].quantile(0.95),
            "loss_median": grouped["normalized_loss"].median(),
            "loss_p95": grouped["normalized_loss"].quantile(0.95),
            "not_converged": (~table["converged"].astype(bool)).groupby(table["method"]).sum(),
        }
    )
    return summary.reset_index()


def speed_ratio(table: pd.DataFrame) -> float:
    """Baseline median time over network median time"""
    times = table.groupby("method")["seconds"].median()
    return float(times["baseline"] / times["nn"])


def accuracy_fraction(table: pd.DataFrame, factor: float = 10.0) -> float:
    """Fraction of frames whose network loss is within `factor` of the baseline loss"""
    pivot = table.pivot(index="frame", columns="method", values="normalized_loss")
    return float(np.mean(pivot["nn"] <= factor * pivot["baseline"]))


def check_converged(table: pd.DataFrame) -> None:
    """Raise NotConverged when any baseline solve hit its iteration limit"""
    baseline = table[table["method"] == "baseline"]
    missed = int((~baseline["converged"].astype(bool)).sum())
    if missed:
        raise NotConverged(
            f"Baseline did not converge on {missed} of {len(baseline)} frames",
            data={"frames": baseline.loc[~baseline["converged"].astype(bool), "frame"].tolist()},
        )
