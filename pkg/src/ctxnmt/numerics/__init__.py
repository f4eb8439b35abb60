from . import ops
from .optim import Adam, AdamState, LRSchedule, NumericalError, adam_step, global_norm
from .tensor import ContractError, Graph, ShapeError, Tensor, as_tensor, backward

__all__ = [
    "Adam",
    "AdamState",
    "ContractError",
    "Graph",
    "LRSchedule",
    "NumericalError",
    "ShapeError",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "global_norm",
    "ops",
]
