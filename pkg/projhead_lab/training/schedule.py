"""Training regimes and the epoch loop that dispatches to them.

Each regime is a `RegimeDefine` registered in `REGIMES`. `run_schedule`
checks the head against the regime, then runs one `run_epoch` per epoch and
hands an `EpochRecord` to every sink.
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from projhead_lab.utils.compat import StrEnum
from typing import Callable, Iterable, Literal
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from .moving import pca_refresh, slow_optimal_epoch, slow_single_epoch
from .optim import OptimizerState
from .steps import bilevel_step, encoder_step, joint_step
from ..constants import (
    DEFAULT_INNER_STEPS,
    DEFAULT_LR,
    DEFAULT_PROXIMAL,
    DEFAULT_WEIGHT_DECAY,
    PCA_SUBSET_SIZE,
)
from ..core.records import EpochRecord, EvalRecord, RunMetrics
from ..data.augment import AugConfig
from ..data.batches import make_views, minibatches
from ..data.datasets import LabeledDataset
from ..errors import ConfigError, LabError
from ..models.encoder import Encoder
from ..models.heads import Head, HeadKind, init_head, parameter_checksum
from ..objectives import LossConfig
from ..utils.seeds import Stream, stream_rng


class Regime(StrEnum):
    JOINT = "joint"
    BILEVEL = "bilevel"
    FIXED_HEAD = "fixed_head"
    PCA_REFRESH = "pca_refresh"
    SLOW_SINGLE = "slow_single"
    SLOW_OPTIMAL = "slow_optimal"
    NO_HEAD = "no_head"


class TrainSchedule(BaseModel):
    model_config = ConfigDict(extra="forbid")

    regime: Regime = Regime.JOINT
    epochs: int = Field(60, ge=0)
    batch_size: int = 128
    loss: LossConfig = Field(default_factory=LossConfig)

    optimizer: Literal["adam", "sgd"] = "adam"
    lr: float = Field(DEFAULT_LR, ge=0.0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)

    # bilevel
    inner_steps: int = Field(DEFAULT_INNER_STEPS, ge=0)
    proximal: float = Field(DEFAULT_PROXIMAL, ge=0.0)
    inner_optimizer: Literal["adam", "sgd"] = "adam"
    inner_momentum: float = Field(0.9, ge=0.0, lt=1.0)
    reset_inner_state: bool = False

    # moving heads
    pca_which: Literal["top", "bottom"] = "top"
    pca_subset: int = Field(PCA_SUBSET_SIZE, ge=2)
    slow_subset: int = Field(512, ge=2)
    slow_tol: float = Field(1e-4, gt=0.0)
    slow_max_iters: int = Field(100, ge=0)

    seed: int = 0

    @field_validator("batch_size")
    @classmethod
    def _batch_has_negatives(cls, v: int) -> int:
        if v < 2:
            raise ValueError(
                f"batch_size must be >= 2 so every InfoNCE anchor has a negative, got {v}"
            )
        return v

    def outer_optimizer(self) -> OptimizerState:
        return OptimizerState(
            kind=self.optimizer, lr=self.lr, weight_decay=self.weight_decay, momentum=self.momentum
        )

    def head_optimizer(self) -> OptimizerState:
        if self.regime == Regime.BILEVEL:
            # the proximal term regularizes g; no weight decay in the inner loop
            return OptimizerState(
                kind=self.inner_optimizer, lr=self.lr, weight_decay=0.0, momentum=self.inner_momentum
            )
        return self.outer_optimizer()


@dataclass
class TrainingState:
    schedule: TrainSchedule
    dataset: LabeledDataset
    aug: AugConfig
    encoder: Encoder
    head: Head
    opt_f: OptimizerState
    opt_g: OptimizerState
    fixed_subset: np.ndarray | None = None


@dataclass
class EpochOutcome:
    losses: list[float]
    inner_losses: list[float] = field(default_factory=list)
    g_delta_norm: float = 0.0


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return float(np.mean(values)) if values else 0.0


def _subset_indices(n: int, size: int, seed: int, stream: Stream, *keys: int) -> np.ndarray:
    rng = stream_rng(seed, stream, *keys)
    return np.sort(rng.choice(n, size=min(n, size), replace=False))


def _epoch_batches(state: TrainingState, epoch: int):
    s = state.schedule
    return minibatches(state.dataset, s.batch_size, s.seed, state.aug, epoch)


class RegimeDefine(ABC):
    regime: Regime
    head_kinds: frozenset[HeadKind]

    def check(self, head: Head):
        if head.kind not in self.head_kinds:
            allowed = ", ".join(sorted(self.head_kinds))
            raise ConfigError(
                f"regime {self.regime} cannot train a {head.kind} head (allowed: {allowed})"
            )

    def prepare(self, state: TrainingState):
        return None

    @abstractmethod
    def run_epoch(self, state: TrainingState, epoch: int) -> EpochOutcome:
        raise NotImplementedError("Regime must implement run_epoch")


TRAINABLE = frozenset({HeadKind.LINEAR, HeadKind.NONLINEAR})


class JointRegime(RegimeDefine):
    regime = Regime.JOINT
    head_kinds = TRAINABLE

    def run_epoch(self, state, epoch):
        losses, deltas = [], []
        for batch in _epoch_batches(state, epoch):
            r = joint_step(state.encoder, state.head, batch, state.schedule.loss, state.opt_f, state.opt_g)
            state.opt_f, state.opt_g = r.opt_f, r.opt_g
            losses.append(r.loss)
            deltas.append(r.g_delta_norm)
        return EpochOutcome(losses, [], _mean(deltas))


class FixedHeadRegime(JointRegime):
    regime = Regime.FIXED_HEAD
    head_kinds = frozenset(
        {HeadKind.FIXED_RANDOM, HeadKind.FIXED_PRETRAINED, HeadKind.DIAGONAL_LOW_RANK}
    )


class NoHeadRegime(JointRegime):
    regime = Regime.NO_HEAD
    head_kinds = frozenset({HeadKind.NONE})


class BilevelRegime(RegimeDefine):
    regime = Regime.BILEVEL
    head_kinds = TRAINABLE

    def run_epoch(self, state, epoch):
        s = state.schedule
        losses, deltas, trajectories = [], [], []
        for batch in _epoch_batches(state, epoch):
            opt_g = state.opt_g.fresh() if s.reset_inner_state else state.opt_g
            r = bilevel_step(
                state.encoder, state.head, batch, s.loss, state.opt_f, opt_g,
                inner_steps=s.inner_steps, proximal=s.proximal,
            )
            state.opt_f, state.opt_g = r.opt_f, r.opt_g
            losses.append(r.loss)
            deltas.append(r.g_delta_norm)
            trajectories.append(r.inner_losses)
        # mean inner trajectory over the epoch's batches
        inner = np.mean(trajectories, axis=0).tolist() if trajectories else []
        return EpochOutcome(losses, inner, _mean(deltas))


class PCARefreshRegime(RegimeDefine):
    regime = Regime.PCA_REFRESH
    head_kinds = frozenset({HeadKind.PCA_LINEAR})

    def _refresh(self, state: TrainingState, epoch: int):
        s = state.schedule
        idx = _subset_indices(len(state.dataset), s.pca_subset, s.seed, Stream.PCA_SUBSET, epoch + 1)
        state.head = pca_refresh(state.encoder, state.dataset.examples[idx], state.head.d, s.pca_which)

    def prepare(self, state):
        self._refresh(state, -1)

    def run_epoch(self, state, epoch):
        losses = []
        for batch in _epoch_batches(state, epoch):
            loss, state.opt_f = encoder_step(state.encoder, state.head, batch, state.schedule.loss, state.opt_f)
            losses.append(loss)
        before = state.head.params["W"]
        self._refresh(state, epoch)
        return EpochOutcome(losses, [], float(np.linalg.norm(state.head.params["W"] - before)))


class SlowSingleRegime(RegimeDefine):
    regime = Regime.SLOW_SINGLE
    head_kinds = TRAINABLE

    def run_epoch(self, state, epoch):
        r = slow_single_epoch(
            state.encoder, state.head, _epoch_batches(state, epoch),
            state.schedule.loss, state.opt_f, state.opt_g,
        )
        state.opt_f, state.opt_g = r.opt_f, r.opt_g
        return EpochOutcome(r.losses, [], r.g_delta_norm)


class SlowOptimalRegime(RegimeDefine):
    regime = Regime.SLOW_OPTIMAL
    head_kinds = TRAINABLE

    def prepare(self, state):
        s = state.schedule
        state.fixed_subset = _subset_indices(len(state.dataset), s.slow_subset, s.seed, Stream.SLOW_SUBSET)
        if state.fixed_subset.shape[0] < 2:
            raise ConfigError("slow_optimal needs a subset of at least 2 examples")

    def run_epoch(self, state, epoch):
        s = state.schedule
        losses = []
        for batch in _epoch_batches(state, epoch):
            loss, state.opt_f = encoder_step(state.encoder, state.head, batch, s.loss, state.opt_f)
            losses.append(loss)
        views = make_views(state.dataset, state.fixed_subset, state.aug, s.seed, epoch)
        trace = slow_optimal_epoch(
            state.encoder, state.head, views, s.slow_tol, s.slow_max_iters,
            state.opt_g.fresh(), s.loss,
        )
        state.opt_g = trace.opt_g
        return EpochOutcome(losses, trace.losses, trace.g_delta_norm)


class RegimeRegistry:
    def __init__(self):
        self.__regimes: dict[Regime, RegimeDefine] = {}

    def register(self, define: RegimeDefine):
        self.__regimes[define.regime] = define

    def add_regimes(self, defines: list[RegimeDefine]):
        for define in defines:
            self.register(define)

    def has_regime(self, regime: Regime | str) -> bool:
        return Regime(regime) in self.__regimes

    def list_regimes(self):
        return list(self.__regimes.keys())

    def get(self, regime: Regime | str) -> RegimeDefine:
        regime = Regime(regime)
        if regime not in self.__regimes:
            raise ConfigError(f"no training regime registered for {regime}")
        return self.__regimes[regime]


REGIMES = RegimeRegistry()
REGIMES.add_regimes(
    [
        JointRegime(),
        BilevelRegime(),
        FixedHeadRegime(),
        PCARefreshRegime(),
        SlowSingleRegime(),
        SlowOptimalRegime(),
        NoHeadRegime(),
    ]
)


Sink = Callable[[EpochRecord | EvalRecord], None]
Snapshot = Callable[[int, Encoder, Head], list[EvalRecord]]


def run_schedule(
    schedule: TrainSchedule,
    dataset: LabeledDataset,
    encoder: Encoder,
    head: Head,
    aug: AugConfig,
    sinks: Iterable[Sink] = (),
    snapshot: Snapshot | None = None,
    run=None,
) -> tuple[RunMetrics, Encoder, Head]:
    """Train `encoder` and `head` in place under `schedule`; returns metrics and the final models.

    `snapshot(epoch, encoder, head)` runs after each epoch and its records go
    to the sinks as well. `run`, when given, receives progress messages.
    """
    sinks = list(sinks)
    define = REGIMES.get(schedule.regime)
    if schedule.regime == Regime.NO_HEAD and head.kind != HeadKind.NONE:
        head = init_head(HeadKind.NONE, encoder.output_dim)
    define.check(head)
    if schedule.batch_size > len(dataset):
        raise ConfigError(f"batch size {schedule.batch_size} exceeds dataset size {len(dataset)}")

    state = TrainingState(
        schedule=schedule,
        dataset=dataset,
        aug=aug,
        encoder=encoder,
        head=head,
        opt_f=schedule.outer_optimizer(),
        opt_g=schedule.head_optimizer(),
    )
    define.prepare(state)
    frozen_checksum = (
        parameter_checksum(state.head.params) if schedule.regime == Regime.FIXED_HEAD else None
    )

    def emit(record):
        metrics.add(record)
        for sink in sinks:
            sink(record)

    metrics = RunMetrics()
    for epoch in range(schedule.epochs):
        start = time.perf_counter()
        outcome = define.run_epoch(state, epoch)
        record = EpochRecord(
            epoch=epoch,
            regime=str(schedule.regime),
            loss=_mean(outcome.losses),
            inner_losses=outcome.inner_losses,
            g_delta_norm=outcome.g_delta_norm,
            wall_ms=round((time.perf_counter() - start) * 1000.0, 3),
        )
        emit(record)
        if run is not None:
            run.log(f"epoch {epoch}: loss {record.loss:.5f}, |Δg| {record.g_delta_norm:.3g}")
        if snapshot is not None:
            for eval_record in snapshot(epoch, state.encoder, state.head):
                emit(eval_record)

    if frozen_checksum is not None and parameter_checksum(state.head.params) != frozen_checksum:
        raise LabError(f"frozen {state.head.kind} head changed during training")
    return metrics, state.encoder, state.head
