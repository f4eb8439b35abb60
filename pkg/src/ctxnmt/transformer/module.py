"""Parameter containers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..numerics import Tensor


class Module:
    """Walks attributes in definition order to find parameters.

    A tensor reachable through several attributes (a tied or shared table)
    is reported once, under the first name it was found at.
    """

    def _children(self) -> Iterator[tuple[str, object]]:
        yield from vars(self).items()

    def named_parameters(self, prefix: str = "", _seen: set[int] | None = None) -> list[tuple[str, Tensor]]:
        seen = set() if _seen is None else _seen
        out: list[tuple[str, Tensor]] = []
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad and id(value) not in seen:
                    seen.add(id(value))
                    out.append((full, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(full + ".", seen))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{full}.{i}.", seen))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            if missing or extra:
                raise KeyError(f"state mismatch: missing={missing} unexpected={extra}")
        for name, arr in state.items():
            if name not in own:
                continue
            if own[name].shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: {own[name].shape} vs {arr.shape}")
            own[name].data[...] = arr


def param(arr: np.ndarray) -> Tensor:
    return Tensor(np.array(arr, dtype=np.float64), requires_grad=True)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return param(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
