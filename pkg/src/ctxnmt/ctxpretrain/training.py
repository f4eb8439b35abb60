from __future__ import annotations

from dataclasses import replace
from typing import Sequence, TextIO

from ..corpus.instances import TrainingInstance
from ..runtime.checkpoint import Checkpoint, CheckpointError, CheckpointShapeError, apply_params
from ..training import TrainResult, TrainSettings, train
from .models import FinetuneModel, PretrainModel, finetune_forward, pretrain_forward


def pretrain(
    model: PretrainModel,
    triples: Sequence[TrainingInstance],
    settings: TrainSettings,
    dev: Sequence[TrainingInstance] | None = None,
    metrics_out: TextIO | None = None,
    vocab_hashes: dict[str, str] | None = None,
) -> tuple[Checkpoint, TrainResult]:
    """Train on monolingual ``(prev, cur, next)`` triples; targets are ignored."""
    from ..runtime.models import to_checkpoint  # runtime.models imports this package

    mono = [TrainingInstance(cur_src=t.cur_src, prev_src=t.prev_src, next_src=t.next_src) for t in triples]
    mono_dev = None
    if dev:
        mono_dev = [TrainingInstance(cur_src=t.cur_src, prev_src=t.prev_src, next_src=t.next_src) for t in dev]
    result = train(
        model, lambda b, rng: pretrain_forward(model, b, rng), mono, replace(settings, metric="joint"),
        mono_dev, metrics_out=metrics_out,
    )
    return to_checkpoint(model, result.steps, vocab_hashes, result.optimizer), result


def pretrain_name_mapping(ckpt: Checkpoint) -> dict[str, list[str]]:
    """Checkpoint name -> fine-tuning model names it initialises."""
    shared = ckpt.variant.get("encoder_mode") == "shared_encoder"
    out: dict[str, list[str]] = {}
    for name in ckpt.params:
        if name == "src_embedding":
            out[name] = ["src_embedding"]
        elif name.startswith("pre_encoder."):
            rest = name[len("pre_encoder."):]
            out[name] = [name] + ([f"next_encoder.{rest}"] if shared else [])
        elif name.startswith("next_encoder."):
            out[name] = [name]
    return out


def init_finetune_from_pretrained(model: FinetuneModel, ckpt: Checkpoint, tag: str = "checkpoint") -> FinetuneModel:
    """Copy the shared source table and both context encoders from ``ckpt``.

    The translation encoder body and decoder keep their fresh initialisation.
    """
    if ckpt.kind != "pretrain":
        raise CheckpointError(f"expected a pretrain checkpoint, got {ckpt.kind!r}")
    d_ckpt = ckpt.model_config.get("d_model")
    if d_ckpt != model.cfg.d_model:
        raise CheckpointShapeError(f"d_model mismatch: model {model.cfg.d_model} vs checkpoint {d_ckpt}")
    v_ckpt = ckpt.params["src_embedding"].shape[0]
    if v_ckpt != model.cfg.src_vocab:
        raise CheckpointShapeError(f"source vocabulary mismatch: model {model.cfg.src_vocab} vs checkpoint {v_ckpt}")
    own = dict(model.named_parameters())
    written: list[str] = []
    for src_name, targets in pretrain_name_mapping(ckpt).items():
        for dst in targets:
            if dst not in own:
                raise CheckpointShapeError(f"fine-tuning model has no parameter {dst!r} for {src_name!r}")
            written += apply_params(own, {src_name: ckpt.params[src_name]}, {src_name: dst})
    expected = [n for n in own if n == "src_embedding" or n.startswith(("pre_encoder.", "next_encoder."))]
    missing = sorted(set(expected) - set(written))
    if missing:
        raise CheckpointShapeError(f"checkpoint left context parameters uninitialised: {missing[:5]}")
    model.initialized_from = tag
    return model


def finetune(
    model: FinetuneModel,
    corpus: Sequence[TrainingInstance],
    settings: TrainSettings,
    dev: Sequence[TrainingInstance] | None = None,
    metrics_out: TextIO | None = None,
) -> TrainResult:
    named = model.named_parameters()
    if not model.trainable_context_encoders:
        frozen = {id(p) for _, p in model.context_parameters()}
        named = [(n, p) for n, p in named if id(p) not in frozen]
    return train(
        model, lambda b, rng: finetune_forward(model, b, rng), corpus, replace(settings, metric="tgt"), dev,
        named_params=named, metrics_out=metrics_out,
    )
