from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TransformerConfig:
    """Architecture hyper-parameters shared by every model variant."""

    d_model: int = 512
    d_ff: int = 2048
    num_layers: int = 6
    num_heads: int = 8
    src_vocab: int = 32000
    tgt_vocab: int = 32000
    max_len: int = 128
    dropout: float = 0.1
    label_smoothing: float = 0.1
    pre_norm: bool = False
    tie_output: bool = True
    ln_eps: float = 1e-6

    def __post_init__(self):
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by num_heads={self.num_heads}")
        for name in ("d_model", "d_ff", "num_layers", "num_heads", "src_vocab", "tgt_vocab", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.num_heads


def attention_params(d: int) -> int:
    return 4 * d * d + 4 * d


def ffn_params(d: int, d_ff: int) -> int:
    return 2 * d * d_ff + d_ff + d


def encoder_layer_params(d: int, d_ff: int) -> int:
    # self-attention, feed-forward, two layer norms
    return attention_params(d) + ffn_params(d, d_ff) + 4 * d


def decoder_layer_params(d: int, d_ff: int) -> int:
    # self-attention, cross-attention, feed-forward, three layer norms
    return 2 * attention_params(d) + ffn_params(d, d_ff) + 6 * d


def encoder_body_params(cfg: TransformerConfig) -> int:
    """Encoder parameters excluding the embedding table."""
    n = cfg.num_layers * encoder_layer_params(cfg.d_model, cfg.d_ff)
    if cfg.pre_norm:
        n += 2 * cfg.d_model
    return n


def decoder_body_params(cfg: TransformerConfig, vocab: int | None = None) -> int:
    """Decoder parameters excluding the input embedding table.

    An untied output projection (``vocab`` x ``d_model``) counts as body.
    """
    n = cfg.num_layers * decoder_layer_params(cfg.d_model, cfg.d_ff)
    if cfg.pre_norm:
        n += 2 * cfg.d_model
    if not cfg.tie_output:
        n += cfg.d_model * (cfg.tgt_vocab if vocab is None else vocab)
    return n
