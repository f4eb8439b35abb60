from .config import (
    TransformerConfig,
    decoder_body_params,
    decoder_layer_params,
    encoder_body_params,
    encoder_layer_params,
)
from .layers import AttentionMask, FeedForward, LayerNorm, Linear, MultiHeadAttention, multi_head_attention, positional_encoding
from .module import Module
from .nmt import NMTModel
from .stacks import DecoderStack, EncoderStack, decode, encode, new_embedding

__all__ = [
    "AttentionMask",
    "DecoderStack",
    "EncoderStack",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "NMTModel",
    "TransformerConfig",
    "decode",
    "decoder_body_params",
    "decoder_layer_params",
    "encode",
    "encoder_body_params",
    "encoder_layer_params",
    "multi_head_attention",
    "new_embedding",
    "positional_encoding",
]
