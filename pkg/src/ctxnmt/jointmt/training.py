from __future__ import annotations

from dataclasses import replace
from typing import TYPE_CHECKING, Sequence, TextIO

from ..corpus.instances import TrainingInstance
from ..training import TrainResult, TrainSettings, train
from ..transformer.nmt import NMTModel
from .model import JointLossWeights, JointModel, joint_forward

if TYPE_CHECKING:
    from ..runtime.checkpoint import Checkpoint


def train_joint_step1(
    model: JointModel,
    corpus: Sequence[TrainingInstance],
    weights: JointLossWeights,
    settings: TrainSettings,
    mode: str = "pre+next",
    dev: Sequence[TrainingInstance] | None = None,
    metrics_out: TextIO | None = None,
    skip_absent: bool = False,
) -> TrainResult:
    """Minimise the joint loss over all parameters; keeps the best dev model."""

    def loss_fn(batch, rng):
        return joint_forward(model, batch, weights, mode, rng, skip_absent)

    return train(model, loss_fn, corpus, replace(settings, metric="joint"), dev, metrics_out=metrics_out)


def train_joint_step2(
    model: JointModel,
    corpus: Sequence[TrainingInstance],
    settings: TrainSettings,
    dev: Sequence[TrainingInstance] | None = None,
    metrics_out: TextIO | None = None,
) -> tuple[NMTModel, TrainResult]:
    """Drop the context decoders and keep training on translation loss only.

    A fresh optimizer is used.  The returned model shares its tensors with
    ``model``'s encoder and target decoder.
    """
    nmt = model.nmt_path()
    pairs = [TrainingInstance(cur_src=i.cur_src, tgt=i.tgt) for i in corpus]
    dev_pairs = [TrainingInstance(cur_src=i.cur_src, tgt=i.tgt) for i in dev] if dev else None
    result = train(
        nmt, lambda b, rng: nmt.loss(b, rng), pairs, replace(settings, metric="tgt"), dev_pairs,
        metrics_out=metrics_out,
    )
    return nmt, result


def init_joint_from_pretrained(model: JointModel, ckpt: Checkpoint) -> JointModel:
    """Overwrite the shared source embedding table with a pre-trained one."""
    table = ckpt.params.get("src_embedding")
    if table is None:
        raise KeyError("checkpoint has no 'src_embedding' table")
    have = model.src_embedding.shape
    if table.shape[0] != have[0]:
        raise ValueError(f"source vocabulary mismatch: model {have[0]} vs checkpoint {table.shape[0]}")
    if table.shape[1] != have[1]:
        raise ValueError(f"d_model mismatch: model {have[1]} vs checkpoint {table.shape[1]}")
    model.src_embedding.data[...] = table
    return model
