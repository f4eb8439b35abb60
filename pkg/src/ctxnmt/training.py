"""Optimizer loop shared by every model variant."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from .corpus.batching import Batch, batch_by_tokens
from .corpus.instances import TrainingInstance
from .losses import LossBreakdown
from .numerics import Adam, LRSchedule, NumericalError, Tensor, backward
from .transformer.module import Module

log = logging.getLogger(__name__)

LossFn = Callable[[Batch, "np.random.Generator | None"], LossBreakdown]


@dataclass
class TrainSettings:
    max_steps: int = 1000
    budget_tokens: int = 4096
    warmup_steps: int = 4000
    lr_factor: float = 1.0
    seed: int = 0
    eval_interval: int = 100
    patience: int = 5
    clip_norm: float | None = None
    dropout: bool = True
    target_dev_loss: float | None = None
    metric: str = "joint"


class TrainingDiverged(NumericalError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass
class TrainResult:
    steps: int
    best_dev: float | None = None
    best_step: int | None = None
    reached_target_at: int | None = None
    history: list[LossBreakdown] = field(default_factory=list)
    dev_history: list[tuple[int, float]] = field(default_factory=list)
    optimizer: Adam | None = None


def format_metrics(step: int, lr: float, bd: LossBreakdown) -> str:
    def f(x):
        return "-" if x is None else repr(float(x))

    return f"{step} {f(lr)} {f(bd.loss_tgt)} {f(bd.loss_pre)} {f(bd.loss_next)} {f(bd.joint)}"


def parse_metrics_line(line: str) -> dict:
    step, lr, tgt, pre, nxt, joint = line.split()

    def g(x):
        return None if x == "-" else float(x)

    return {"step": int(step), "lr": g(lr), "loss_tgt": g(tgt), "loss_pre": g(pre), "loss_next": g(nxt), "joint": g(joint)}


def pick_metric(bd: LossBreakdown, metric: str) -> float:
    value = {"joint": bd.joint, "tgt": bd.loss_tgt, "pre": bd.loss_pre, "next": bd.loss_next}[metric]
    if value is None:
        raise ValueError(f"metric {metric!r} is not computed by this loss")
    return value


def evaluate(loss_fn: LossFn, batches: Sequence[Batch], metric: str = "joint") -> float:
    """Instance-weighted mean of a loss component over batches, no dropout."""
    total = weight = 0.0
    for b in batches:
        total += pick_metric(loss_fn(b, None), metric) * b.size
        weight += b.size
    return total / weight


def make_batches(instances: Sequence[TrainingInstance], budget: int, seed: int) -> list[Batch]:
    return [Batch.from_instances(group) for group in batch_by_tokens(instances, budget, seed)]


def train(
    model: Module,
    loss_fn: LossFn,
    train_instances: Sequence[TrainingInstance],
    settings: TrainSettings,
    dev_instances: Sequence[TrainingInstance] | None = None,
    named_params: Sequence[tuple[str, Tensor]] | None = None,
    metrics_out: TextIO | None = None,
    d_model: int | None = None,
) -> TrainResult:
    """Run up to ``max_steps`` Adam updates.

    With dev data, the parameters with the best dev metric are restored at
    the end and training stops after ``patience`` evaluations without
    improvement.  A non-finite loss or gradient restores the last good
    parameters and raises ``TrainingDiverged``.
    """
    named = list(named_params if named_params is not None else model.named_parameters())
    d_model = d_model if d_model is not None else model.cfg.d_model
    schedule = LRSchedule(d_model, settings.warmup_steps, settings.lr_factor)
    opt = Adam(named, schedule, clip_norm=settings.clip_norm)
    dropout_rng = np.random.default_rng(settings.seed + 1) if settings.dropout else None
    dev_batches = make_batches(dev_instances, settings.budget_tokens, 0) if dev_instances else None

    result = TrainResult(steps=0, optimizer=opt)
    good_state = {n: p.data.copy() for n, p in named}
    best_state = None
    bad_evals = 0
    epoch = 0
    batches: list[Batch] = []
    for step in range(1, settings.max_steps + 1):
        if not batches:
            batches = make_batches(train_instances, settings.budget_tokens, settings.seed + epoch)
            epoch += 1
        batch = batches.pop(0)
        opt.zero_grad()
        bd = loss_fn(batch, dropout_rng)
        if not math.isfinite(bd.joint):
            _restore(named, good_state)
            raise TrainingDiverged(f"loss became {bd.joint} at step {step}", step)
        backward(bd.tensor)
        try:
            lr = opt.step()
        except NumericalError as exc:
            _restore(named, good_state)
            raise TrainingDiverged(f"{exc} at step {step}", step) from exc
        bd.tensor = None
        result.history.append(bd)
        result.steps = step
        if metrics_out is not None:
            metrics_out.write(format_metrics(step, lr, bd) + "\n")
        if step % settings.eval_interval == 0:
            good_state = {n: p.data.copy() for n, p in named}
        if dev_batches is not None and step % settings.eval_interval == 0:
            dev = evaluate(loss_fn, dev_batches, settings.metric)
            result.dev_history.append((step, dev))
            log.info("step %d dev %s %.6f", step, settings.metric, dev)
            if result.best_dev is None or dev < result.best_dev:
                result.best_dev, result.best_step = dev, step
                best_state = {n: p.data.copy() for n, p in named}
                bad_evals = 0
            else:
                bad_evals += 1
            if settings.target_dev_loss is not None and dev <= settings.target_dev_loss:
                result.reached_target_at = step
                break
            if bad_evals >= settings.patience:
                log.info("early stop at step %d", step)
                break
    if best_state is not None:
        _restore(named, best_state)
    return result


def _restore(named: Sequence[tuple[str, Tensor]], state: dict[str, np.ndarray]) -> None:
    for n, p in named:
        p.data[...] = state[n]
