from __future__ import annotations

from dataclasses import dataclass, field

from .numerics import Tensor, ops


@dataclass
class LossBreakdown:
    """Per-component losses; ``None`` marks a component that was not computed."""

    loss_tgt: float | None
    loss_pre: float | None = None
    loss_next: float | None = None
    joint: float = 0.0
    tensor: Tensor | None = field(default=None, repr=False, compare=False)

    def fields(self) -> tuple[float | None, float | None, float | None, float]:
        return self.loss_tgt, self.loss_pre, self.loss_next, self.joint


def weighted_sum(terms: list[tuple[float, Tensor | None]]) -> Tensor:
    """``w0*t0 + w1*t1 + ...`` left to right, skipping absent terms.

    A unit weight contributes the term itself, so the first term of a joint
    loss is never rescaled.
    """
    total: Tensor | None = None
    for weight, term in terms:
        if term is None:
            continue
        part = term if weight == 1.0 else ops.scale(term, weight)
        total = part if total is None else ops.add(total, part)
    if total is None:
        raise ValueError("no active loss terms")
    return total


def breakdown(tgt: Tensor | None, pre: Tensor | None, nxt: Tensor | None, total: Tensor) -> LossBreakdown:
    return LossBreakdown(
        loss_tgt=None if tgt is None else tgt.item(),
        loss_pre=None if pre is None else pre.item(),
        loss_next=None if nxt is None else nxt.item(),
        joint=total.item(),
        tensor=total,
    )
