"""
Frame-log replay harness

Streams a recorded FrameLog through network inference on the schedule of its
own timestamps,
measuring per-frame latency, deadline misses against the frame budget and
the per-marker mismatch e_t. SIGINT/SIGTERM stop the replay after the
current frame; the frames processed so far are still reported.
"""

import asyncio
import logging
import signal
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from .config.settings import ReplayConfig
from .datagen import FrameLog
from .net.inference import Reconstructor

logger = logging.getLogger(__name__)

REPLAY_COLUMNS = [
    "frame",
    "timestamp",
    "latency_ms",
    "error",
    "missed",
    "tip_x",
    "tip_y",
    "tip_z",
]


@dataclass
class ReplayReport:
    frames: pd.DataFrame
    rate_hz: float
    budget_ms: float
    interrupted: bool = False

    def latency_percentiles(self) -> dict:
        latency = self.frames["latency_ms"].to_numpy()
        if latency.size == 0:
            return {"p50": float("nan"), "p95": float("nan"), "p99": float("nan"), "max": float("nan")}
        p50, p95, p99 = np.percentile(latency, [50, 95, 99])
        return {"p50": float(p50), "p95": float(p95), "p99": float(p99), "max": float(latency.max())}

    @property
    def missed(self) -> int:
        return int(self.frames["missed"].sum())

    @property
    def sustained(self) -> bool:
        """True when the p95 latency fits in both the budget and the frame period"""
        if self.frames.empty:
            return False
        p95 = self.latency_percentiles()["p95"]
        return p95 < self.budget_ms and p95 < 1000.0 / self.rate_hz


class FrameReplayer:
    """Paced replay of a frame log through a bound reconstructor"""

    def __init__(
        self,
        reconstructor: Reconstructor,
        log: FrameLog,
        cfg: ReplayConfig,
        realtime: bool = True,
        n_frames: Optional[int] = None,
    ):
        self.reconstructor = reconstructor
        self.log = log
        self.cfg = cfg
        self.realtime = realtime
        self.n_frames = len(log) if n_frames is None else min(n_frames, len(log))
        self._shutdown_event = asyncio.Event()
        self._interrupted = False

    @property
    def period(self) -> float:
        return 1.0 / self.log.rate_hz

    def offsets(self) -> np.ndarray:
        """Release time of each frame relative to the first, in seconds"""
        return self.log.timestamps[: self.n_frames] - self.log.timestamps[0]

    async def run(self) -> ReplayReport:
        """Replay frames until the log ends or a shutdown is requested"""
        logger.info(
            "Replaying %d frames at %.1f Hz (budget %.1f ms)",
            self.n_frames,
            self.log.rate_hz,
            self.cfg.budget_ms,
        )
        rows: List[dict] = []
        offsets = self.offsets()
        started = time.perf_counter()
        for index in range(self.n_frames):
            if self._shutdown_event.is_set():
                break
            due = started + offsets[index]
            if self.realtime:
                delay = due - time.perf_counter()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)

            t0 = time.perf_counter()
            result = self.reconstructor.reconstruct(self.log.measurement(index))
            finished = time.perf_counter()
            latency_ms = 1e3 * (finished - t0)
            late = self.realtime and finished > due + self.period
            tip = result.tip
            rows.append(
                {
                    "frame": index,
                    "timestamp": float(self.log.timestamps[index]),
                    "latency_ms": latency_ms,
                    "error": result.error,
                    "missed": bool(latency_ms > self.cfg.budget_ms or late),
                    "tip_x": tip[0],
                    "tip_y": tip[1],
                    "tip_z": tip[2],
                }
            )

        report = ReplayReport(
            frames=pd.DataFrame(rows, columns=REPLAY_COLUMNS),
            rate_hz=self.log.rate_hz,
            budget_ms=self.cfg.budget_ms,
            interrupted=self._interrupted,
        )
        logger.info(
            "Replay finished: %d frames, %d missed, p95 latency %.3f ms",
            len(rows),
            report.missed,
            report.latency_percentiles()["p95"],
        )
        return report

    def stop(self) -> None:
        self._shutdown_event.set()

    def handle_signal(self, signame: str) -> None:
        """Handle shutdown signals"""
        logger.info("Received signal %s, stopping replay", signame)
        self._interrupted = True
        self.stop()


async def run_replay(
    reconstructor: Reconstructor,
    log: FrameLog,
    cfg: ReplayConfig,
    realtime: bool = True,
    n_frames: Optional[int] = None,
) -> ReplayReport:
    """Replay with SIGINT/SIGTERM handlers installed on the running loop"""
    replayer = FrameReplayer(reconstructor, log, cfg, realtime, n_frames)

    loop = asyncio.get_running_loop()
    installed = []
    for signame in ("SIGINT", "SIGTERM"):
        try:
            loop.add_signal_handler(getattr(signal, signame), replayer.handle_signal, signame)
            installed.append(signame)
        except (NotImplementedError, RuntimeError):
            # Signal handlers are unavailable on Windows and outside the main thread
            pass

    try:
        return await replayer.run()
    finally:
        for signame in installed:
            loop.remove_signal_handler(getattr(signal, signame))
