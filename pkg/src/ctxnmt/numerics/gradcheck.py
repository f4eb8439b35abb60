"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .tensor import Tensor, backward


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero gradients sane."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


class GradRow(NamedTuple):
    name: str
    index: tuple
    analytic: float
    numeric: float
    rel_err: float
    noise: float

    @property
    def at_noise_level(self) -> bool:
        """Both estimates are indistinguishable from zero at this step size."""
        return max(abs(self.analytic), abs(self.numeric)) <= self.noise


def _central(loss_fn: Callable[[], float], param: Tensor, index: tuple, h: float) -> tuple[float, float]:
    old = param.data[index]
    param.data[index] = old + h
    up = loss_fn()
    param.data[index] = old - h
    down = loss_fn()
    param.data[index] = old
    grad = (up - down) / (2.0 * h)
    # Rounding in the two loss evaluations alone can move the quotient by this much.
    noise = 2.0 * np.finfo(np.float64).eps * (abs(up) + abs(down)) / (2.0 * h)
    return grad, noise


def numeric_grad(loss_fn: Callable[[], float], param: Tensor, index: tuple, h: float = 1e-5) -> float:
    return _central(loss_fn, param, index, h)[0]


def check_gradients(
    build_loss: Callable[[], Tensor],
    named_params: Sequence[tuple[str, Tensor]],
    num_samples: int = 20,
    h: float = 1e-5,
    seed: int = 0,
) -> list[GradRow]:
    """Compare backprop against finite differences on random scalar entries.

    Returns one ``GradRow`` per sampled entry.  ``noise`` bounds the rounding
    error of the difference quotient; when both estimates fall under it the
    true gradient is zero to working precision and ``rel_err`` is meaningless.
    Entries are drawn only from parameters that the loss actually reaches.
    """
    for _, p in named_params:
        p.grad = np.zeros_like(p.data)
    backward(build_loss())
    live = [(n, p) for n, p in named_params if np.any(p.grad != 0)]
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(num_samples):
        name, p = live[rng.integers(len(live))]
        flat = int(rng.integers(p.size))
        idx = np.unravel_index(flat, p.shape)
        analytic = float(p.grad[idx])
        numeric, noise = _central(lambda: build_loss().item(), p, idx, h)
        rows.append(GradRow(name, tuple(int(i) for i in idx), analytic, numeric, relative_error(analytic, numeric), noise))
    return rows
