"""Ways of injecting context-encoder states into the translation encoder."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..numerics import ShapeError, Tensor, ops
from ..transformer.layers import AttentionMask, LayerNorm, MultiHeadAttention
from ..transformer.module import Module


class ContextFusionMode(str, Enum):
    SUM_MEAN_POOLED = "sum_mean_pooled"
    EMBEDDINGS_ONLY = "embeddings_only"
    EXPLICIT_ATTENTION = "explicit_attention"


def mean_pool(states: Tensor, valid: np.ndarray | None = None, present: np.ndarray | None = None) -> Tensor:
    """Average ``[B, L, d]`` states over valid positions to ``[B, d]``.

    Rows whose ``present`` flag is False pool to the zero vector.
    """
    b, length, _ = states.shape
    valid = np.ones((b, length), bool) if valid is None else np.asarray(valid, bool)
    weights = valid / valid.sum(axis=1, keepdims=True)
    if present is not None:
        weights = weights * np.asarray(present, bool)[:, None]
    return ops.sum(ops.mul(states, Tensor(weights[:, :, None])), axis=1)


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 2:
        return ops.reshape(x, (1,) + x.shape), True
    return x, False


def fuse_context(
    cur_embeddings: Tensor,
    prev_states: Tensor | None,
    next_states: Tensor | None,
    mode: ContextFusionMode | str = ContextFusionMode.SUM_MEAN_POOLED,
    prev_valid: np.ndarray | None = None,
    next_valid: np.ndarray | None = None,
    prev_present: np.ndarray | None = None,
    next_present: np.ndarray | None = None,
) -> Tensor:
    """``embeddings + pool(prev) + pool(next)`` broadcast over positions.

    Accepts unbatched ``[L, d]`` inputs or batches ``[B, L, d]``.  An absent
    context (``None``) contributes nothing.
    """
    mode = ContextFusionMode(mode)
    if mode is ContextFusionMode.EMBEDDINGS_ONLY:
        return cur_embeddings
    if mode is not ContextFusionMode.SUM_MEAN_POOLED:
        raise ValueError(f"fuse_context does not implement {mode.value}; use explicit_context_attend")
    cur, squeeze = _batched(cur_embeddings)
    out = cur
    for states, valid, present in ((prev_states, prev_valid, prev_present), (next_states, next_valid, next_present)):
        if states is None:
            continue
        s, _ = _batched(states)
        if s.shape[-1] != cur.shape[-1] or s.shape[0] != cur.shape[0]:
            raise ShapeError(f"context states {s.shape} incompatible with embeddings {cur.shape}")
        if valid is not None and np.ndim(valid) == 1:
            valid = np.asarray(valid)[None]
        pooled = mean_pool(s, valid, present)
        out = ops.add(out, ops.reshape(pooled, (pooled.shape[0], 1, pooled.shape[1])))
    return ops.reshape(out, out.shape[1:]) if squeeze else out


class ContextAttention(Module):
    """Attention from current-sentence states over one context's states,
    followed by residual and layer norm."""

    def __init__(self, rng: np.random.Generator, d_model: int, num_heads: int, eps: float = 1e-6):
        self.attn = MultiHeadAttention(rng, d_model, num_heads)
        self.norm = LayerNorm(d_model, eps)

    def __call__(self, cur: Tensor, ctx: Tensor, ctx_valid: np.ndarray | None = None) -> Tensor:
        mask = None
        if ctx_valid is not None:
            ctx_valid = np.asarray(ctx_valid, bool)
            mask = AttentionMask.padding(ctx_valid, cur.shape[-2])
        return self.norm(ops.add(cur, self.attn.attend(cur, ctx, mask=mask)[0]))


def explicit_context_attend(
    cur_states: Tensor, ctx_states: Tensor, weights: ContextAttention, ctx_valid: np.ndarray | None = None
) -> Tensor:
    if ctx_states.shape[-2] < 1:
        raise ShapeError("context must have at least one state; encode [CTX_NONE] for absent context")
    return weights(cur_states, ctx_states, ctx_valid)
