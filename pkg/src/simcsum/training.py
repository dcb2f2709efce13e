"""Joint training of the two decoders over a shared encoder."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics as nx
from .model import Dropout, ModelParams, TaskId, decoder_forward, encode_source
from .numerics import AdamState, ContractError, LrSchedule, NumericError, Tensor
from .text_data import PAD, Batch, Splits, batches_from


class TrainingDiverged(RuntimeError):
    """A non-finite value appeared during an optimizer step."""

    def __init__(self, step: int, detail: str):
        super().__init__(f"training diverged at step {step}: {detail}")
        self.step = step
        self.detail = detail


@dataclass(frozen=True)
class TrainConfig:
    lambda_sum: float = 0.75
    lambda_sim: float | None = None  # None -> 1 - lambda_sum
    max_epochs: int = 25
    batch_size: int = 4
    base_lr: float = 5e-5
    warmup_steps: int = 100
    seed: int = 0
    patience: int | None = 3
    clip_norm: float | None = 1.0
    max_steps: int | None = None

    def __post_init__(self):
        for name in ("lambda_sum", "lambda_sim"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ContractError(f"{name}={value} outside [0, 1]")
        for name in ("max_epochs", "batch_size", "warmup_steps"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ContractError("max_steps must be >= 1")

    @property
    def sim_weight(self) -> float:
        return 1.0 - self.lambda_sum if self.lambda_sim is None else self.lambda_sim

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossReport:
    step: int
    lr: float
    loss_sim: float
    loss_sum: float
    loss_joint: float
    tokens_sim: int
    tokens_sum: int

    def to_record(self) -> dict:
        return {"step": self.step, "lr": self.lr, "loss_sim": self.loss_sim, "loss_sum": self.loss_sum,
                "loss_joint": self.loss_joint, "tokens_sim": self.tokens_sim, "tokens_sum": self.tokens_sum}


def task_loss(logits: Tensor, target_ids, pad_id: int = PAD) -> Tensor:
    """Token-mean NLL of ``target_ids`` (already shifted for teacher forcing), ignoring padding."""
    target_ids = np.asarray(target_ids, dtype=np.int64)
    return nx.cross_entropy(logits, target_ids, target_ids != pad_id)


def joint_loss(loss_sim, loss_sum, lambda_sum: float, lambda_sim: float | None = None):
    """``lambda_sum * loss_sum + lambda_sim * loss_sim`` with ``lambda_sim`` defaulting to ``1 - lambda_sum``.

    Works on floats or on tape tensors.
    """
    if not 0.0 <= lambda_sum <= 1.0:
        raise ContractError(f"lambda_sum={lambda_sum} outside [0, 1]")
    w_sim = 1.0 - lambda_sum if lambda_sim is None else lambda_sim
    if not 0.0 <= w_sim <= 1.0:
        raise ContractError(f"lambda_sim={w_sim} outside [0, 1]")
    if isinstance(loss_sim, Tensor) or isinstance(loss_sum, Tensor):
        return loss_sum * lambda_sum + loss_sim * w_sim
    for v in (loss_sim, loss_sum):
        if not math.isfinite(v):
            raise ContractError("joint_loss inputs must be finite")
    return lambda_sum * loss_sum + w_sim * loss_sim


def batch_losses(params: ModelParams, batch: Batch, dropout=None) -> dict:
    """One encoder pass feeding every decoder the model has; returns ``{task: (loss, tokens)}``."""
    enc = encode_source(params, batch.x, batch.x_mask, dropout)
    out = {}
    for task in params.tasks:
        y = batch.y_sim if task is TaskId.SIM else batch.y_sum
        dec_in, target = y[:, :-1], y[:, 1:]
        logits = decoder_forward(params, task, dec_in, enc, batch.x_mask, dec_in != PAD, dropout)
        out[task] = (task_loss(logits, target), int((target != PAD).sum()))
    return out


def _combine(losses: dict, config: TrainConfig):
    loss_sum, n_sum = losses[TaskId.SUM]
    if TaskId.SIM in losses:
        loss_sim, n_sim = losses[TaskId.SIM]
        joint = joint_loss(loss_sim, loss_sum, config.lambda_sum, config.lambda_sim)
        return joint, loss_sim.item(), n_sim, loss_sum.item(), n_sum
    return loss_sum, 0.0, 0, loss_sum.item(), n_sum


def evaluate(params: ModelParams, instances, config: TrainConfig) -> float:
    """Mean joint loss over ``instances`` in evaluation mode (batch means, then averaged)."""
    if not instances:
        return float("nan")
    vals = []
    with nx.no_grad():
        for batch in batches_from(instances, config.batch_size):
            _, ls, _, lz, _ = _combine(batch_losses(params, batch), config)
            if TaskId.SIM in params.tasks:
                vals.append(joint_loss(ls, lz, config.lambda_sum, config.lambda_sim))
            else:
                vals.append(lz)
    return float(np.mean(vals))


@dataclass
class TrainState:
    params: ModelParams
    optim: AdamState = field(default_factory=AdamState)
    step: int = 0
    epoch: int = 0
    batch_index: int = 0
    best_val: float | None = None
    best_params: dict | None = None
    bad_epochs: int = 0
    done: bool = False


@dataclass
class TrainResult:
    state: TrainState
    log: list
    val_history: list
    interrupted: bool = False

    @property
    def params(self) -> ModelParams:
        return self.state.params


def schedule_for(n_train: int, config: TrainConfig) -> LrSchedule:
    per_epoch = math.ceil(n_train / config.batch_size)
    total = per_epoch * config.max_epochs
    if config.max_steps is not None:
        total = min(total, config.max_steps)
    return LrSchedule(config.base_lr, config.warmup_steps, total)


def train_step(state: TrainState, batch: Batch, config: TrainConfig, dropout_rate: float,
               schedule: LrSchedule) -> LossReport:
    params = state.params
    t = state.step + 1
    lr = nx.lr_at(t, schedule)
    drop = Dropout(dropout_rate, config.seed, t) if dropout_rate > 0 else None
    try:
        joint, ls, ns, lz, nz = _combine(batch_losses(params, batch, drop), config)
        nx.backward(joint)
    except NumericError as exc:
        nx.reset_tape()
        params.zero_grad()
        raise TrainingDiverged(t, str(exc)) from exc
    grads = {name: p.grad for name, p in params.items() if p.grad is not None}
    params.zero_grad()
    if config.clip_norm is not None:
        norm = nx.clip_grad_norm(grads, config.clip_norm, order=params.names())
        if not math.isfinite(norm):
            raise TrainingDiverged(t, "non-finite gradient norm")
    nx.adam_step(params.tensors, grads, state.optim, lr)
    state.step = t
    if TaskId.SIM in params.tasks:
        joint_value = joint_loss(ls, lz, config.lambda_sum, config.lambda_sim)
    else:
        joint_value = lz
    if not math.isfinite(joint_value):
        raise TrainingDiverged(t, "non-finite loss")
    return LossReport(t, lr, ls, lz, joint_value, ns, nz)


def train(params: ModelParams, splits: Splits, config: TrainConfig, *, state: TrainState | None = None,
          on_step=None, stop_after: int | None = None) -> TrainResult:
    """Epoch loop: one encoder pass, one pass per decoder, joint loss, one Adam step per batch.

    Validation joint loss is computed after every epoch; the best parameters
    are kept and training stops after ``patience`` epochs without improvement
    (or at ``max_epochs`` / ``max_steps``). ``stop_after`` interrupts before
    the optimizer step with that index + 1, leaving a resumable state.
    """
    if state is None:
        state = TrainState(params)
    if not splits.train:
        raise ContractError("empty training split")
    schedule = schedule_for(len(splits.train), config)
    dropout_rate = state.params.config.dropout_rate
    log, val_history = [], []
    while not state.done and state.epoch < config.max_epochs:
        batches = batches_from(splits.train, config.batch_size, config.seed, state.epoch)
        for bi in range(state.batch_index, len(batches)):
            if state.step >= schedule.total_steps:
                break
            if stop_after is not None and state.step >= stop_after:
                return TrainResult(state, log, val_history, interrupted=True)
            report = train_step(state, batches[bi], config, dropout_rate, schedule)
            state.batch_index = bi + 1
            log.append(report)
            if on_step is not None:
                on_step(report)
        val = evaluate(state.params, splits.valid, config)
        val_history.append(val)
        if math.isfinite(val) and (state.best_val is None or val < state.best_val):
            state.best_val = val
            state.best_params = {k: v.copy() for k, v in state.params.arrays().items()}
            state.bad_epochs = 0
        else:
            state.bad_epochs += 1
        state.epoch += 1
        state.batch_index = 0
        if config.patience and state.bad_epochs >= config.patience:
            state.done = True
        if state.step >= schedule.total_steps:
            state.done = True
    state.done = True
    return TrainResult(state, log, val_history)
