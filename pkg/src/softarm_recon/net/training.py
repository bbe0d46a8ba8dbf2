"""
Unsupervised training with mini-batch Adam

Samples are split 80/20 (by default) with a seeded permutation, shuffled
every epoch and fed in mini-batches; the validation loss is evaluated after
each epoch and the parameters of the best validation epoch are returned.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

from ..config.settings import TrainConfig
from ..datagen import TrainingSet
from ..errors import Diverged, MarkerLayoutMismatch, OutOfRange
from ..geom import FloatArray, Pose
from ..reduction import BasisSet
from ..rod import NODE_TOL, RodProperties
from .loss import PhysicsLoss
from .model import FEATURES_PER_MARKER, MlpModel, init_model

logger = logging.getLogger(__name__)


class Adam:
    """Adam with bias-corrected moment estimates"""

    def __init__(
        self,
        params: Sequence[FloatArray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[FloatArray], grads: Sequence[FloatArray]) -> List[FloatArray]:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / c1
            v_hat = self.v[k] / c2
            out.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon))
        return out


@dataclass
class TrainReport:
    """Per-epoch losses (raw objective and normalised by eta * N_m)

    `to_frame` holds only values that are reproducible for a fixed seed;
    `epoch_seconds` stays on the report and in the log.
    """

    normalization: float
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    best_epoch: int = -1
    restart: int = 0
    seed: int = 0

    @property
    def epochs(self) -> int:
        return len(self.val_loss)

    @property
    def train_normalized(self) -> List[float]:
        return [v / self.normalization for v in self.train_loss]

    @property
    def val_normalized(self) -> List[float]:
        return [v / self.normalization for v in self.val_loss]

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch] if self.val_loss else float("inf")

    def record(self, train_loss: float, val_loss: float, seconds: float = 0.0) -> bool:
        """Append one epoch; True when it is the new best"""
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.epoch_seconds.append(seconds)
        if self.best_epoch < 0 or val_loss < self.val_loss[self.best_epoch]:
            self.best_epoch = len(self.val_loss) - 1
            return True
        return False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": np.arange(1, self.epochs + 1),
                "train_loss": self.train_loss,
                "val_loss": self.val_loss,
                "train_normalized": self.train_normalized,
                "val_normalized": self.val_normalized,
                "best": np.arange(self.epochs) == self.best_epoch,
            }
        )


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Adam step size for a zero-based epoch

    The cosine schedule starts at `learning_rate` and reaches `lr_final` on the
    last epoch.
    """
    if cfg.lr_schedule == "constant" or cfg.epochs == 1:
        return cfg.learning_rate
    progress = min(max(epoch, 0), cfg.epochs - 1) / (cfg.epochs - 1)
    return cfg.lr_final + 0.5 * (cfg.learning_rate - cfg.lr_final) * (1.0 + np.cos(np.pi * progress))


def split_indices(count: int, val_fraction: float, seed: int) -> Tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Seeded (train, validation) index split; both parts are non-empty"""
    if count < 2:
        raise OutOfRange(f"Training needs at least two samples, got {count}")
    order = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,))).permutation(count)
    n_val = int(np.clip(round(val_fraction * count), 1, count - 1))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def check_layout(marker_s: npt.ArrayLike, expected: npt.ArrayLike, length: float) -> None:
    marker_s = np.asarray(marker_s, dtype=np.float64).reshape(-1)
    expected = np.asarray(expected, dtype=np.float64).reshape(-1)
    if marker_s.shape != expected.shape or np.any(np.abs(marker_s - expected) > NODE_TOL * length):
        raise MarkerLayoutMismatch(
            f"Marker layout {marker_s.tolist()} does not match the expected {expected.tolist()}",
            data={"found": marker_s.tolist(), "expected": expected.tolist()},
        )


def _train_once(
    cfg: TrainConfig,
    objective: PhysicsLoss,
    features: FloatArray,
    train_idx: npt.NDArray[np.int64],
    val_idx: npt.NDArray[np.int64],
    model: MlpModel,
    seed: int,
    restart: int,
) -> Tuple[MlpModel, TrainReport]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, restart)))
    adam = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    report = TrainReport(normalization=objective.normalization(), restart=restart, seed=seed)
    params = model.parameters()
    best = params
    val_features = features[val_idx]

    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        adam.learning_rate = learning_rate_at(cfg, epoch)
        order = rng.permutation(train_idx)
        running = 0.0
        for batch, start in enumerate(range(0, order.size, cfg.batch_size)):
            index = order[start : start + cfg.batch_size]
            value, grads = objective.value_and_gradient(model, features[index])
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise Diverged(epoch + 1, batch + 1, value)
            running += value * index.size
            params = adam.step(params, grads)
            model = model.with_parameters(params)

        val_loss = objective.value(model, val_features)
        if not np.isfinite(val_loss):
            raise Diverged(epoch + 1, 0, val_loss)
        seconds = time.perf_counter() - started
        if report.record(running / order.size, val_loss, seconds):
            best = params
        logger.info(
            "Epoch %d/%d train=%.4e val=%.4e (normalised %.4e) lr=%.2e in %.2fs",
            epoch + 1,
            cfg.epochs,
            report.train_loss[-1],
            val_loss,
            report.val_normalized[-1],
            adam.learning_rate,
            seconds,
        )

    return model.with_parameters(best), report


def train(
    cfg: TrainConfig,
    training: TrainingSet,
    basis: BasisSet,
    rod: RodProperties,
    base: Pose,
    marker_s: npt.ArrayLike,
    seed: int = 0,
    threads: int = 1,
    restarts: Optional[int] = None,
) -> Tuple[MlpModel, TrainReport]:
    """Train `restarts` independently seeded models and keep the best validation run"""
    marker_s = np.asarray(marker_s, dtype=np.float64)
    check_layout(training.marker_s, marker_s, rod.length)
    if len(training) < 2:
        raise OutOfRange("Training set is empty")
    layer_sizes = [FEATURES_PER_MARKER * marker_s.size, *cfg.hidden_sizes, basis.n_coefficients]
    objective = PhysicsLoss(basis, rod, base, marker_s, cfg.eta, threads)
    train_idx, val_idx = split_indices(len(training), cfg.val_fraction, seed)
    logger.info(
        "Training %s on %d samples (%d validation), eta=%.3g",
        "x".join(str(n) for n in layer_sizes),
        train_idx.size,
        val_idx.size,
        cfg.eta,
    )

    best_model: Optional[MlpModel] = None
    best_report: Optional[TrainReport] = None
    for restart in range(restarts or cfg.restarts):
        init_seed = np.random.SeedSequence(seed, spawn_key=(1, restart))
        model = init_model(
            layer_sizes,
            marker_s,
            seed=int(init_seed.generate_state(1)[0]),
            position_scale=rod.length,
            coeff_mean=basis.coefficient_mean(),
            coeff_std=basis.coefficient_std(),
            basis_checksum=basis.checksum(),
        )
        model, report = _train_once(
            cfg, objective, training.features, train_idx, val_idx, model, seed, restart
        )
        logger.info(
            "Run %d: best epoch %d, val=%.4e", restart + 1, report.best_epoch + 1, report.best_val_loss
        )
        if best_report is None or report.best_val_loss < best_report.best_val_loss:
            best_model, best_report = model, report

    if best_model is None or best_report is None:
        raise OutOfRange("At least one training run is required")
    return best_model, best_report
