"""Adam with the inverse-square-root warmup schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


class NumericalError(FloatingPointError):
    """A gradient or loss became NaN/Inf."""


@dataclass(frozen=True)
class LRSchedule:
    d_model: int
    warmup_steps: int = 4000
    factor: float = 1.0

    def __post_init__(self):
        if self.d_model <= 0 or self.warmup_steps <= 0:
            raise ValueError("d_model and warmup_steps must be positive")

    def rate(self, step: int) -> float:
        if step < 1:
            raise ValueError(f"learning rate is defined for step >= 1, got {step}")
        return (
            self.factor
            * self.d_model ** -0.5
            * min(step ** -0.5, step * self.warmup_steps ** -1.5)
        )


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **kw) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **kw,
        )

    @property
    def size(self) -> int:
        return int(sum(m.size for m in self.m))


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(float(sum(float((g * g).sum()) for g in grads)))


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    schedule: LRSchedule,
    names: Sequence[str] | None = None,
    clip_norm: float | None = None,
) -> float:
    """Apply one bias-corrected Adam update in place; returns the rate used.

    Raises ``NumericalError`` (without touching anything) if a gradient is
    not finite.
    """
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            label = names[i] if names is not None else f"#{i}"
            raise NumericalError(f"non-finite gradient for parameter {label}")
    if clip_norm is not None:
        norm = global_norm(grads)
        if norm > clip_norm:
            grads = [g * (clip_norm / norm) for g in grads]
    t = state.step + 1
    lr = schedule.rate(t)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    state.step = t
    return lr


class Adam:
    """Adam bound to a fixed list of named parameters."""

    def __init__(
        self,
        named_params: Sequence[tuple[str, Tensor]],
        schedule: LRSchedule,
        beta1: float = 0.9,
        beta2: float = 0.98,
        epsilon: float = 1e-9,
        clip_norm: float | None = None,
    ):
        self.names = [n for n, _ in named_params]
        self.params = [p for _, p in named_params]
        self.schedule = schedule
        self.clip_norm = clip_norm
        self.state = AdamState.for_params(self.params, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def step(self) -> float:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        return adam_step(self.params, grads, self.state, self.schedule, self.names, self.clip_norm)
