"""Encoder and decoder stacks.

Everything runs on padded batches ``[B, L]`` of token ids with a boolean
validity mask of the same shape.  The helpers ``encode``/``decode`` accept a
single unbatched sentence as well.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..numerics import ContractError, Tensor, ops
from .config import TransformerConfig, decoder_body_params, encoder_body_params
from .layers import AttentionMask, FeedForward, LayerNorm, MultiHeadAttention, positional_encoding
from .module import Module, param


def new_embedding(rng: np.random.Generator, vocab: int, d_model: int) -> Tensor:
    return param(rng.normal(0.0, d_model**-0.5, size=(vocab, d_model)))


class _Sublayer:
    """Residual wiring shared by encoder and decoder layers."""

    @staticmethod
    def apply(x: Tensor, norm: LayerNorm, fn, pre_norm: bool, rate: float, rng) -> Tensor:
        if pre_norm:
            return ops.add(x, ops.dropout(fn(norm(x)), rate, rng))
        return norm(ops.add(x, ops.dropout(fn(x), rate, rng)))


class EncoderLayer(Module):
    def __init__(self, rng: np.random.Generator, cfg: TransformerConfig):
        self.self_attn = MultiHeadAttention(rng, cfg.d_model, cfg.num_heads)
        self.ffn = FeedForward(rng, cfg.d_model, cfg.d_ff)
        self.norm1 = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.norm2 = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.pre_norm = cfg.pre_norm
        self.rate = cfg.dropout

    def __call__(self, x: Tensor, mask: AttentionMask, rng=None) -> Tensor:
        rate = self.rate if rng is not None else 0.0
        x = _Sublayer.apply(x, self.norm1, lambda h: self.self_attn(h, h, mask), self.pre_norm, rate, rng)
        return _Sublayer.apply(x, self.norm2, lambda h: self.ffn(h, rng, rate), self.pre_norm, rate, rng)


class DecoderLayer(Module):
    def __init__(self, rng: np.random.Generator, cfg: TransformerConfig):
        self.self_attn = MultiHeadAttention(rng, cfg.d_model, cfg.num_heads)
        self.cross_attn = MultiHeadAttention(rng, cfg.d_model, cfg.num_heads)
        self.ffn = FeedForward(rng, cfg.d_model, cfg.d_ff)
        self.norm1 = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.norm2 = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.norm3 = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.pre_norm = cfg.pre_norm
        self.rate = cfg.dropout

    def __call__(self, x, memory, self_mask, cross_mask, rng=None) -> Tensor:
        rate = self.rate if rng is not None else 0.0
        x = _Sublayer.apply(x, self.norm1, lambda h: self.self_attn(h, h, self_mask), self.pre_norm, rate, rng)
        x = _Sublayer.apply(
            x, self.norm2, lambda h: self.cross_attn(h, memory, cross_mask), self.pre_norm, rate, rng
        )
        return _Sublayer.apply(x, self.norm3, lambda h: self.ffn(h, rng, rate), self.pre_norm, rate, rng)


def _embed(table: Tensor, ids: np.ndarray, cfg: TransformerConfig, extra: Tensor | None) -> Tensor:
    x = ops.embedding(table, ids)
    if extra is not None:
        x = ops.add(x, extra)
    x = ops.scale(x, math.sqrt(cfg.d_model))
    return ops.add(x, Tensor(positional_encoding(ids.shape[-1], cfg.d_model)))


def _check_ids(ids: np.ndarray, vocab: int, max_len: int, what: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2 or ids.shape[1] == 0:
        raise ContractError(f"{what} needs a nonempty [batch, length] id array, got shape {ids.shape}")
    if ids.shape[1] > max_len:
        raise ContractError(f"{what} length {ids.shape[1]} exceeds max_len={max_len}")
    bad = np.argwhere((ids < 0) | (ids >= vocab))
    if len(bad):
        b, pos = (int(i) for i in bad[0])
        raise IndexError(f"{what}: token id {int(ids[b, pos])} at position {pos} (row {b}) outside vocabulary of size {vocab}")
    return ids


class EncoderStack(Module):
    def __init__(self, cfg: TransformerConfig, embedding: Tensor, rng: np.random.Generator):
        self.embedding = embedding
        self.layers = [EncoderLayer(rng, cfg) for _ in range(cfg.num_layers)]
        if cfg.pre_norm:
            self.final_norm = LayerNorm(cfg.d_model, cfg.ln_eps)
        self.cfg = cfg

    def __call__(
        self,
        ids: np.ndarray,
        valid: np.ndarray | None = None,
        extra_input: Tensor | None = None,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Encode a padded batch to ``[B, L, d_model]``.

        ``extra_input`` is added to the raw embeddings before scaling and
        positions (used for context fusion).
        """
        cfg = self.cfg
        ids = _check_ids(ids, self.embedding.shape[0], cfg.max_len, "encoder input")
        valid = np.ones(ids.shape, bool) if valid is None else np.asarray(valid, bool)
        x = _embed(self.embedding, ids, cfg, extra_input)
        x = ops.dropout(x, cfg.dropout, rng)
        mask = AttentionMask.padding(valid, ids.shape[1])
        for layer in self.layers:
            x = layer(x, mask, rng)
        if cfg.pre_norm:
            x = self.final_norm(x)
        return x

    def body_parameters(self) -> list[tuple[str, Tensor]]:
        return [(n, p) for n, p in self.named_parameters() if p is not self.embedding]

    def body_size(self) -> int:
        n = int(sum(p.size for _, p in self.body_parameters()))
        assert n == encoder_body_params(self.cfg), "encoder storage disagrees with the closed form"
        return n


class DecoderStack(Module):
    def __init__(self, cfg: TransformerConfig, embedding: Tensor, rng: np.random.Generator, tied: bool | None = None):
        self.embedding = embedding
        self.layers = [DecoderLayer(rng, cfg) for _ in range(cfg.num_layers)]
        if cfg.pre_norm:
            self.final_norm = LayerNorm(cfg.d_model, cfg.ln_eps)
        tied = cfg.tie_output if tied is None else tied
        self.output_proj = embedding if tied else param(
            rng.normal(0.0, cfg.d_model**-0.5, size=embedding.shape)
        )
        self.cfg = cfg

    @property
    def vocab(self) -> int:
        return self.embedding.shape[0]

    def hidden(
        self,
        ids: np.ndarray,
        memory: Tensor,
        memory_valid: np.ndarray | None = None,
        valid: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        cfg = self.cfg
        ids = _check_ids(ids, self.vocab, cfg.max_len + 1, "decoder input")
        if memory.ndim != 3 or memory.shape[0] != ids.shape[0] or memory.shape[2] != cfg.d_model:
            raise ContractError(f"memory shape {memory.shape} incompatible with decoder input {ids.shape}")
        valid = np.ones(ids.shape, bool) if valid is None else np.asarray(valid, bool)
        if memory_valid is None:
            memory_valid = np.ones(memory.shape[:2], bool)
        x = ops.dropout(_embed(self.embedding, ids, cfg, None), cfg.dropout, rng)
        self_mask = AttentionMask.combined(valid)
        cross_mask = AttentionMask.padding(memory_valid, ids.shape[1])
        for layer in self.layers:
            x = layer(x, memory, self_mask, cross_mask, rng)
        if cfg.pre_norm:
            x = self.final_norm(x)
        return x

    def __call__(self, ids, memory, memory_valid=None, valid=None, rng=None) -> Tensor:
        """Teacher-forced logits ``[B, T, vocab]``."""
        h = self.hidden(ids, memory, memory_valid, valid, rng)
        return ops.linear(h, ops.transpose(self.output_proj))

    def body_parameters(self) -> list[tuple[str, Tensor]]:
        return [(n, p) for n, p in self.named_parameters() if p is not self.embedding]

    def body_size(self) -> int:
        n = int(sum(p.size for _, p in self.body_parameters()))
        tied = self.output_proj is self.embedding
        expected = decoder_body_params(replace(self.cfg, tie_output=tied), self.vocab)
        assert n == expected, "decoder storage disagrees with the closed form"
        return n


def encode(tokens, stack: EncoderStack, pad_mask=None) -> Tensor:
    """Encode one sentence (``[L]``) or a batch (``[B, L]``)."""
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.ndim == 1:
        valid = None if pad_mask is None else np.asarray(pad_mask, bool)[None]
        out = stack(ids[None], valid)
        return ops.reshape(out, out.shape[1:])
    return stack(ids, pad_mask)


def decode(tgt_tokens, memory: Tensor, stack: DecoderStack, memory_valid=None, tgt_valid=None) -> Tensor:
    """Teacher-forced logits for one sentence or a batch."""
    ids = np.asarray(tgt_tokens, dtype=np.int64)
    if ids.size == 0:
        raise ContractError("decode needs a nonempty target")
    if ids.ndim == 1:
        mem = ops.reshape(memory, (1,) + memory.shape) if memory.ndim == 2 else memory
        mv = None if memory_valid is None else np.asarray(memory_valid, bool)[None]
        tv = None if tgt_valid is None else np.asarray(tgt_valid, bool)[None]
        out = stack(ids[None], mem, mv, tv)
        return ops.reshape(out, out.shape[1:])
    return stack(ids, memory, memory_valid, tgt_valid)
