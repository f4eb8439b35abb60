"""Sentence-level encoder-decoder used as the baseline and as the step-2 model."""

from __future__ import annotations

import numpy as np

from ..corpus.batching import Batch
from ..losses import LossBreakdown, breakdown
from ..numerics import Tensor, ops
from .config import TransformerConfig
from .module import Module
from .stacks import DecoderStack, EncoderStack, new_embedding


class NMTModel(Module):
    kind = "baseline"

    def __init__(self, cfg: TransformerConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.src_embedding = new_embedding(rng, cfg.src_vocab, cfg.d_model)
        self.tgt_embedding = new_embedding(rng, cfg.tgt_vocab, cfg.d_model)
        self.encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.decoder = DecoderStack(cfg, self.tgt_embedding, rng)

    @classmethod
    def from_parts(cls, cfg: TransformerConfig, encoder: EncoderStack, decoder: DecoderStack) -> "NMTModel":
        """Assemble a model around existing stacks (weights shared, not copied)."""
        model = cls.__new__(cls)
        model.cfg = cfg
        model.src_embedding = encoder.embedding
        model.tgt_embedding = decoder.embedding
        model.encoder = encoder
        model.decoder = decoder
        return model

    def encode_batch(self, batch: Batch, rng=None) -> tuple[Tensor, np.ndarray]:
        return self.encoder(batch.src, batch.src_valid, rng=rng), batch.src_valid

    def loss(self, batch: Batch, rng: np.random.Generator | None = None) -> LossBreakdown:
        memory, mvalid = self.encode_batch(batch, rng)
        logits = self.decoder(batch.tgt.inputs, memory, mvalid, batch.tgt.valid, rng)
        tgt = ops.cross_entropy(logits, batch.tgt.targets, label_smoothing=self.cfg.label_smoothing)
        return breakdown(tgt, None, None, tgt)
