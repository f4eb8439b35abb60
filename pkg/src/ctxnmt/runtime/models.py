"""Model construction from, and conversion to, checkpoints."""

from __future__ import annotations

from dataclasses import asdict, replace

import numpy as np

from ..ctxpretrain.models import FinetuneModel, PretrainModel
from ..jointmt.model import JointModel
from ..numerics import Adam
from ..transformer.config import TransformerConfig, attention_params, decoder_body_params, encoder_body_params
from ..transformer.module import Module
from ..transformer.nmt import NMTModel
from .checkpoint import Checkpoint, CheckpointError, CheckpointShapeError, apply_params


def variant_of(model: Module) -> dict:
    if isinstance(model, JointModel):
        return {"decoders": [d for d in ("pre", "next") if getattr(model, f"{d}_decoder") is not None]}
    if hasattr(model, "variant"):
        return model.variant()
    return {}


def build_model(kind: str, cfg: TransformerConfig, seed: int = 0, variant: dict | None = None) -> Module:
    variant = variant or {}
    if kind == "baseline":
        return NMTModel(cfg, seed)
    if kind == "joint":
        return JointModel(cfg, seed, tuple(variant.get("decoders", ("pre", "next"))))
    if kind == "pretrain":
        return PretrainModel(cfg, seed, variant.get("encoder_mode", "two_encoders"))
    if kind == "finetune":
        return FinetuneModel(
            cfg,
            seed,
            variant.get("fusion", "sum_mean_pooled"),
            variant.get("trainable_context_encoders", True),
            variant.get("no_pretrain", False),
        )
    raise CheckpointError(f"unknown model kind {kind!r}")


def closed_form_param_count(kind: str, cfg: TransformerConfig, variant: dict | None = None) -> int:
    """Parameter count from layer formulas, without building the model."""
    variant = variant or {}
    d = cfg.d_model
    enc = encoder_body_params(cfg)
    tied_dec = decoder_body_params(replace(cfg, tie_output=True))
    baseline = cfg.src_vocab * d + cfg.tgt_vocab * d + enc + decoder_body_params(cfg)
    if kind == "baseline":
        return baseline
    if kind == "joint":
        return baseline + len(variant.get("decoders", ("pre", "next"))) * tied_dec
    if kind == "pretrain":
        encoders = 1 if variant.get("encoder_mode") == "shared_encoder" else 2
        return cfg.src_vocab * d + encoders * enc + 2 * tied_dec
    if kind == "finetune":
        n = baseline + 2 * enc
        if variant.get("fusion") == "explicit_attention":
            n += 2 * (attention_params(d) + 2 * d)
        return n
    raise CheckpointError(f"unknown model kind {kind!r}")


def to_checkpoint(
    model: Module,
    step: int = 0,
    vocab_hashes: dict[str, str] | None = None,
    optimizer: Adam | None = None,
    run_config: str = "",
) -> Checkpoint:
    opt_state = None
    if optimizer is not None:
        st = optimizer.state
        opt_state = {
            "step": st.step,
            "beta1": st.beta1,
            "beta2": st.beta2,
            "epsilon": st.epsilon,
            "m": {n: m.copy() for n, m in zip(optimizer.names, st.m)},
            "v": {n: v.copy() for n, v in zip(optimizer.names, st.v)},
        }
    variant = variant_of(model)
    if getattr(model, "initialized_from", None):
        variant = dict(variant, initialized_from=model.initialized_from)
    return Checkpoint(
        kind=model.kind,
        model_config=asdict(model.cfg),
        params=model.state_dict(),
        step=step,
        vocab_hashes=dict(vocab_hashes or {}),
        variant=variant,
        run_config=run_config,
        optimizer=opt_state,
    )


def from_checkpoint(ckpt: Checkpoint) -> Module:
    cfg = TransformerConfig(**ckpt.model_config)
    model = build_model(ckpt.kind, cfg, 0, ckpt.variant)
    own = dict(model.named_parameters())
    if set(own) != set(ckpt.params):
        raise CheckpointShapeError(
            f"parameter names differ: missing={sorted(set(own) - set(ckpt.params))[:5]} "
            f"unexpected={sorted(set(ckpt.params) - set(own))[:5]}"
        )
    apply_params(own, ckpt.params)
    if ckpt.variant.get("initialized_from"):
        model.initialized_from = ckpt.variant["initialized_from"]
    return model


def restore_optimizer(optimizer: Adam, ckpt: Checkpoint) -> None:
    if ckpt.optimizer is None:
        raise CheckpointError("checkpoint carries no optimizer state")
    st = optimizer.state
    st.step = int(ckpt.optimizer["step"])
    for i, n in enumerate(optimizer.names):
        st.m[i] = np.array(ckpt.optimizer["m"][n])
        st.v[i] = np.array(ckpt.optimizer["v"][n])
