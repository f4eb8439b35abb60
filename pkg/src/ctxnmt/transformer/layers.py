"""Attention, feed-forward and normalisation blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..numerics import ContractError, ShapeError, Tensor, ops
from .module import Module, param, xavier


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    """Sinusoidal table: sin on even dimensions, cos on odd ones."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    freq = np.power(10000.0, -i / d_model)
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq[: d_model // 2])
    return table


@dataclass
class AttentionMask:
    """Boolean ``[..., query_len, key_len]`` matrix; True means attend."""

    kind: Literal["padding", "causal", "combined"]
    allowed: np.ndarray

    @classmethod
    def padding(cls, key_valid: np.ndarray, query_len: int) -> "AttentionMask":
        key_valid = np.asarray(key_valid, dtype=bool)
        shape = key_valid.shape[:-1] + (query_len, key_valid.shape[-1])
        return cls("padding", np.broadcast_to(key_valid[..., None, :], shape))

    @classmethod
    def causal(cls, length: int) -> "AttentionMask":
        return cls("causal", np.tril(np.ones((length, length), dtype=bool)))

    @classmethod
    def combined(cls, key_valid: np.ndarray) -> "AttentionMask":
        key_valid = np.asarray(key_valid, dtype=bool)
        length = key_valid.shape[-1]
        causal = np.tril(np.ones((length, length), dtype=bool))
        return cls("combined", causal & key_valid[..., None, :])

    @property
    def shape(self) -> tuple[int, ...]:
        return self.allowed.shape


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        self.weight = xavier(rng, d_in, d_out)
        self.bias = param(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-6):
        self.gain = param(np.ones(d))
        self.bias = param(np.zeros(d))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(Module):
    def __init__(self, rng: np.random.Generator, d_model: int, num_heads: int):
        if d_model % num_heads:
            raise ValueError("d_model must be divisible by num_heads")
        self.num_heads = num_heads
        self.d_model = d_model
        self.q = Linear(rng, d_model, d_model)
        self.k = Linear(rng, d_model, d_model)
        self.v = Linear(rng, d_model, d_model)
        self.o = Linear(rng, d_model, d_model)

    def _split(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        h = self.num_heads
        return ops.transpose(ops.reshape(x, (b, n, h, self.d_model // h)), (0, 2, 1, 3))

    def attend(
        self,
        query: Tensor,
        key: Tensor,
        value: Tensor | None = None,
        mask: AttentionMask | np.ndarray | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Return ``(output, weights)``; weights are ``[B, heads, Lq, Lk]``.

        Inputs are ``[B, L, d]`` or unbatched ``[L, d]``; ``value`` defaults
        to ``key``.
        """
        value = key if value is None else value
        squeeze = query.ndim == 2
        if squeeze:
            query, key, value = (ops.reshape(t, (1,) + t.shape) for t in (query, key, value))
        if query.shape[-1] != self.d_model or key.shape[-1] != self.d_model:
            raise ShapeError(
                f"attention width mismatch: {query.shape}, {key.shape} vs d_model={self.d_model}"
            )
        if key.shape != value.shape:
            raise ShapeError(f"key {key.shape} and value {value.shape} differ")
        b, lq, _ = query.shape
        lk = key.shape[1]
        allowed = None
        if mask is not None:
            allowed = mask.allowed if isinstance(mask, AttentionMask) else np.asarray(mask, bool)
            if allowed.shape[-2:] != (lq, lk):
                raise ShapeError(f"mask shape {allowed.shape} does not match [{lq}, {lk}]")
            if not allowed.any(axis=-1).all():
                raise ContractError("a query position has no attendable key")
            if allowed.ndim == 3:
                allowed = allowed[:, None]
        q = self._split(self.q(query))
        k = self._split(self.k(key))
        v = self._split(self.v(value))
        scores = ops.scale(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(self.d_model // self.num_heads))
        weights = ops.softmax(scores, allowed)
        ctx = ops.matmul(weights, v)
        ctx = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (b, lq, self.d_model))
        out = self.o(ctx)
        if squeeze:
            out = ops.reshape(out, out.shape[1:])
        return out, weights

    def __call__(self, query, key_value, mask=None) -> Tensor:
        return self.attend(query, key_value, mask=mask)[0]


def multi_head_attention(
    q: Tensor, k: Tensor, v: Tensor, mask: AttentionMask | None, weights: MultiHeadAttention
) -> Tensor:
    return weights.attend(q, k, v, mask)[0]


class FeedForward(Module):
    def __init__(self, rng: np.random.Generator, d_model: int, d_ff: int):
        self.inner = Linear(rng, d_model, d_ff)
        self.outer = Linear(rng, d_ff, d_model)

    def __call__(self, x: Tensor, rng=None, rate: float = 0.0) -> Tensor:
        return self.outer(ops.dropout(ops.relu(self.inner(x)), rate, rng))
