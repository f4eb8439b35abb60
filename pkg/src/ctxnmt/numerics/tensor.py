"""Dense float64 tensors with a reverse-mode tape.

Every op result keeps references to its inputs and a closure that maps the
output gradient to input gradients.  ``backward`` orders the reachable nodes
topologically (inputs before outputs) and walks that order in reverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(RuntimeError):
    """A caller broke an operation's precondition."""


class Tensor:
    """An n-dimensional float64 array that may take part in differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "op", "name", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str | None = None,
        _parents: tuple["Tensor", ...] = (),
        _backward: BackwardFn | None = None,
        op: str = "leaf",
    ):
        arr = np.asarray(data, dtype=DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = op
        self.name = name
        self._parents = _parents
        self._backward = _backward

    # -- basic views -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label}, requires_grad={self.requires_grad})"

    # -- operator sugar (implemented in ops) ------------------------------
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops

        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(
    data: np.ndarray, parents: Iterable[Tensor], backward: BackwardFn, op: str
) -> Tensor:
    """Wrap ``data`` as an op output, recording the tape only when needed."""
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, op=op)
    return Tensor(data, op=op)


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    tensor: Tensor


@dataclass
class Graph:
    """Topologically ordered view of everything a tensor depends on.

    ``nodes[k].inputs`` only reference indices below ``k``.
    """

    nodes: list[Node] = field(default_factory=list)

    @classmethod
    def from_output(cls, out: Tensor) -> "Graph":
        order: list[Tensor] = []
        index: dict[int, int] = {}
        # iterative post-order DFS; parents are visited left to right
        stack: list[tuple[Tensor, int]] = [(out, 0)]
        on_stack: set[int] = set()
        while stack:
            node, child = stack.pop()
            if id(node) in index:
                continue
            if child < len(node._parents):
                stack.append((node, child + 1))
                parent = node._parents[child]
                if id(parent) not in index and id(parent) not in on_stack:
                    on_stack.add(id(parent))
                    stack.append((parent, 0))
                continue
            on_stack.discard(id(node))
            index[id(node)] = len(order)
            order.append(node)
        nodes = [
            Node(t.op, tuple(index[id(p)] for p in t._parents), t) for t in order
        ]
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor, graph: Graph | None = None) -> Graph:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every leaf requiring grad.

    Gradients add onto existing ``grad`` arrays, so call ``zero_grad`` on
    parameters between independent steps.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if graph is None:
        graph = Graph.from_output(loss)
    grads: list[np.ndarray | None] = [None] * len(graph.nodes)
    grads[-1] = np.ones_like(loss.data)
    for k in range(len(graph.nodes) - 1, -1, -1):
        node = graph.nodes[k]
        g = grads[k]
        grads[k] = None
        if g is None:
            continue
        t = node.tensor
        if t.is_leaf:
            if t.requires_grad:
                if t.grad is None:
                    t.grad = g.copy()
                else:
                    t.grad += g
            continue
        parent_grads = t._backward(g)
        for idx, pg in zip(node.inputs, parent_grads):
            if pg is None or not graph.nodes[idx].tensor.requires_grad:
                continue
            if grads[idx] is None:
                grads[idx] = pg
            else:
                grads[idx] = grads[idx] + pg
    return graph
