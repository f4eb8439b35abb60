from __future__ import annotations

from typing import Literal

import numpy as np

from ..corpus.batching import Batch
from ..jointmt.model import ConfigurationError
from ..losses import LossBreakdown, breakdown, weighted_sum
from ..numerics import Tensor, ops
from ..transformer.config import TransformerConfig
from ..transformer.module import Module
from ..transformer.stacks import DecoderStack, EncoderStack, new_embedding
from .fusion import ContextAttention, ContextFusionMode, mean_pool

EncoderMode = Literal["two_encoders", "shared_encoder"]


class PretrainModel(Module):
    """Two encoder-decoders over one source embedding table: one predicts the
    previous sentence, the other the next, both from the current one."""

    kind = "pretrain"

    def __init__(self, cfg: TransformerConfig, seed: int = 0, encoder_mode: EncoderMode = "two_encoders"):
        if encoder_mode not in ("two_encoders", "shared_encoder"):
            raise ValueError(f"unknown encoder_mode {encoder_mode!r}")
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder_mode = encoder_mode
        self.src_embedding = new_embedding(rng, cfg.src_vocab, cfg.d_model)
        self.pre_encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.pre_decoder = DecoderStack(cfg, self.src_embedding, rng, tied=True)
        if encoder_mode == "shared_encoder":
            self.next_encoder = self.pre_encoder
        else:
            self.next_encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.next_decoder = DecoderStack(cfg, self.src_embedding, rng, tied=True)

    def variant(self) -> dict:
        return {"encoder_mode": self.encoder_mode}


def pretrain_forward(model: PretrainModel, batch: Batch, rng: np.random.Generator | None = None) -> LossBreakdown:
    """Unit-weight sum of previous- and next-sentence prediction losses."""
    cfg = model.cfg
    pre_mem = model.pre_encoder(batch.src, batch.src_valid, rng=rng)
    if model.next_encoder is model.pre_encoder:
        next_mem = pre_mem
    else:
        next_mem = model.next_encoder(batch.src, batch.src_valid, rng=rng)
    side = batch.prev_side
    pre = ops.cross_entropy(
        model.pre_decoder(side.inputs, pre_mem, batch.src_valid, side.valid, rng),
        side.targets,
        label_smoothing=cfg.label_smoothing,
    )
    side = batch.next_side
    nxt = ops.cross_entropy(
        model.next_decoder(side.inputs, next_mem, batch.src_valid, side.valid, rng),
        side.targets,
        label_smoothing=cfg.label_smoothing,
    )
    total = weighted_sum([(1.0, pre), (1.0, nxt)])
    return breakdown(None, pre, nxt, total)


class FinetuneModel(Module):
    """Translation model whose encoder also sees the previous and next
    sentences through two context encoders."""

    kind = "finetune"

    def __init__(
        self,
        cfg: TransformerConfig,
        seed: int = 0,
        fusion: ContextFusionMode | str = ContextFusionMode.SUM_MEAN_POOLED,
        trainable_context_encoders: bool = True,
        no_pretrain: bool = False,
    ):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.fusion = ContextFusionMode(fusion)
        self.trainable_context_encoders = trainable_context_encoders
        self.no_pretrain = no_pretrain
        self.initialized_from: str | None = None
        # same draw order as NMTModel for the translation path
        self.src_embedding = new_embedding(rng, cfg.src_vocab, cfg.d_model)
        self.tgt_embedding = new_embedding(rng, cfg.tgt_vocab, cfg.d_model)
        self.nmt_encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.decoder = DecoderStack(cfg, self.tgt_embedding, rng)
        self.pre_encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.next_encoder = EncoderStack(cfg, self.src_embedding, rng)
        if self.fusion is ContextFusionMode.EXPLICIT_ATTENTION:
            self.pre_attention = ContextAttention(rng, cfg.d_model, cfg.num_heads, cfg.ln_eps)
            self.next_attention = ContextAttention(rng, cfg.d_model, cfg.num_heads, cfg.ln_eps)

    def variant(self) -> dict:
        return {
            "fusion": self.fusion.value,
            "trainable_context_encoders": self.trainable_context_encoders,
            "no_pretrain": self.no_pretrain,
        }

    def context_parameters(self) -> list[tuple[str, Tensor]]:
        return [
            (n, p)
            for n, p in self.named_parameters()
            if n.startswith("pre_encoder.") or n.startswith("next_encoder.")
        ]

    def _context_states(self, batch: Batch, rng) -> tuple[Tensor, Tensor]:
        p = self.pre_encoder(batch.prev, batch.prev_valid, rng=rng)
        n = self.next_encoder(batch.next, batch.next_valid, rng=rng)
        if not self.trainable_context_encoders:
            p, n = ops.stop_gradient(p), ops.stop_gradient(n)
        return p, n

    def encode_batch(self, batch: Batch, rng=None) -> tuple[Tensor, np.ndarray]:
        if self.initialized_from is None and not self.no_pretrain:
            raise ConfigurationError(
                "fine-tuning model was not initialised from a pre-training checkpoint; "
                "construct it with no_pretrain=True to run without one"
            )
        if self.fusion is ContextFusionMode.EMBEDDINGS_ONLY:
            return self.nmt_encoder(batch.src, batch.src_valid, rng=rng), batch.src_valid
        p, n = self._context_states(batch, rng)
        if self.fusion is ContextFusionMode.SUM_MEAN_POOLED:
            ctx = ops.add(
                mean_pool(p, batch.prev_valid, ~batch.prev_absent),
                mean_pool(n, batch.next_valid, ~batch.next_absent),
            )
            extra = ops.reshape(ctx, (ctx.shape[0], 1, ctx.shape[1]))
            return self.nmt_encoder(batch.src, batch.src_valid, extra, rng=rng), batch.src_valid
        h = self.nmt_encoder(batch.src, batch.src_valid, rng=rng)
        h = self.pre_attention(h, p, batch.prev_valid)
        h = self.next_attention(h, n, batch.next_valid)
        return h, batch.src_valid

    def loss(self, batch: Batch, rng: np.random.Generator | None = None) -> LossBreakdown:
        return finetune_forward(self, batch, rng)


def finetune_forward(model: FinetuneModel, batch: Batch, rng: np.random.Generator | None = None) -> LossBreakdown:
    if batch.tgt is None:
        raise ConfigurationError("fine-tuning needs target sentences")
    memory, mvalid = model.encode_batch(batch, rng)
    logits = model.decoder(batch.tgt.inputs, memory, mvalid, batch.tgt.valid, rng)
    tgt = ops.cross_entropy(logits, batch.tgt.targets, label_smoothing=model.cfg.label_smoothing)
    return breakdown(tgt, None, None, tgt)
