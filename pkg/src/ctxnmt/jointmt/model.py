"""One shared encoder feeding three decoders: previous sentence, next
sentence, and target translation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..corpus.batching import Batch, Side
from ..corpus.vocab import PAD
from ..losses import LossBreakdown, breakdown, weighted_sum
from ..numerics import Tensor, ops
from ..transformer.config import TransformerConfig
from ..transformer.module import Module
from ..transformer.nmt import NMTModel
from ..transformer.stacks import DecoderStack, EncoderStack, new_embedding

Mode = Literal["pre", "next", "pre+next"]
MODES = ("pre", "next", "pre+next")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class JointLossWeights:
    mu: float = 0.5
    lam: float = 0.3

    def __post_init__(self):
        if self.mu < 0 or self.lam < 0:
            raise ValueError("loss weights must be non-negative")

    @classmethod
    def for_mode(cls, mode: str) -> "JointLossWeights":
        """Dev-selected weights: 0.5/0.3 together, 0.5 for a single context."""
        return cls(0.5, 0.3) if mode == "pre+next" else cls(0.5, 0.5)


class JointModel(Module):
    kind = "joint"

    def __init__(self, cfg: TransformerConfig, seed: int = 0, decoders: tuple[str, ...] = ("pre", "next")):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        # same draw order as NMTModel so the translation path matches a
        # baseline built from the same seed
        self.src_embedding = new_embedding(rng, cfg.src_vocab, cfg.d_model)
        self.tgt_embedding = new_embedding(rng, cfg.tgt_vocab, cfg.d_model)
        self.encoder = EncoderStack(cfg, self.src_embedding, rng)
        self.tgt_decoder = DecoderStack(cfg, self.tgt_embedding, rng)
        # context decoders read and predict source tokens through the shared table
        self.pre_decoder = DecoderStack(cfg, self.src_embedding, rng, tied=True) if "pre" in decoders else None
        self.next_decoder = DecoderStack(cfg, self.src_embedding, rng, tied=True) if "next" in decoders else None

    def nmt_path(self) -> NMTModel:
        """The encoder and target decoder as a baseline model sharing weights."""
        return NMTModel.from_parts(self.cfg, self.encoder, self.tgt_decoder)

    def encode_batch(self, batch: Batch, rng=None):
        return self.encoder(batch.src, batch.src_valid, rng=rng), batch.src_valid


def _context_loss(
    decoder: DecoderStack, side: Side, absent: np.ndarray, memory: Tensor, mvalid, cfg, rng, skip_absent: bool
) -> Tensor:
    targets = side.targets
    if skip_absent and absent.any():
        targets = targets.copy()
        targets[absent] = PAD
    logits = decoder(side.inputs, memory, mvalid, side.valid, rng)
    return ops.cross_entropy(logits, targets, label_smoothing=cfg.label_smoothing)


def joint_forward(
    model: JointModel,
    batch: Batch,
    weights: JointLossWeights,
    mode: str = "pre+next",
    rng: np.random.Generator | None = None,
    skip_absent: bool = False,
) -> LossBreakdown:
    """Encode once, decode three ways, combine as tgt + mu*pre + lam*next."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {MODES}")
    if batch.tgt is None:
        raise ConfigurationError("joint training needs target sentences")
    use_pre = "pre" in mode.split("+")
    use_next = "next" in mode.split("+")
    if use_pre and model.pre_decoder is None:
        raise ConfigurationError(f"mode {mode!r} needs a pre-decoder the model does not have")
    if use_next and model.next_decoder is None:
        raise ConfigurationError(f"mode {mode!r} needs a next-decoder the model does not have")
    cfg = model.cfg
    memory, mvalid = model.encode_batch(batch, rng)
    logits = model.tgt_decoder(batch.tgt.inputs, memory, mvalid, batch.tgt.valid, rng)
    tgt = ops.cross_entropy(logits, batch.tgt.targets, label_smoothing=cfg.label_smoothing)
    pre = nxt = None
    if use_pre:
        pre = _context_loss(model.pre_decoder, batch.prev_side, batch.prev_absent, memory, mvalid, cfg, rng, skip_absent)
    if use_next:
        nxt = _context_loss(model.next_decoder, batch.next_side, batch.next_absent, memory, mvalid, cfg, rng, skip_absent)
    total = weighted_sum([(1.0, tgt), (weights.mu, pre), (weights.lam, nxt)])
    return breakdown(tgt, pre, nxt, total)


def param_count(model: Module) -> dict[str, int]:
    """Parameter totals grouped by top-level component, shared tables once."""
    counts: dict[str, int] = {}
    for name, p in model.named_parameters():
        head = name.split(".")[0]
        counts[head] = counts.get(head, 0) + p.size
    counts["total"] = sum(counts.values())
    return counts
