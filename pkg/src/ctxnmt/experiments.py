"""Desk-scale experiments on the synthetic corpora.

Each function is deterministic given its seed and returns plain numbers so
callers (tests, the command line) can compare them against thresholds.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus.instances import TrainingInstance
from .ctxpretrain import ContextFusionMode, FinetuneModel, PretrainModel, finetune, init_finetune_from_pretrained, pretrain
from .corpus.batching import Batch
from .decode_eval import greedy_decode, token_losses
from .jointmt import JointLossWeights, JointModel, joint_forward, train_joint_step1, train_joint_step2
from .runtime.checkpoint import Checkpoint
from .synthetic import (
    AMB_TRANSLATIONS,
    AMBIGUOUS,
    SyntheticTask,
    build_task,
    context_corpus,
    monolingual_context_corpus,
    overfit_corpus,
)
from .training import TrainSettings, evaluate, make_batches, train
from .transformer import NMTModel, TransformerConfig


def small_config(task: SyntheticTask, **overrides) -> TransformerConfig:
    base = dict(
        d_model=32, d_ff=64, num_layers=2, num_heads=4, src_vocab=len(task.src_vocab), tgt_vocab=len(task.tgt_vocab),
        max_len=16, dropout=0.0, label_smoothing=0.0,
    )
    base.update(overrides)
    return TransformerConfig(**base)


@dataclass
class ContextSetup:
    """Parallel train/dev documents plus a monolingual corpus, one vocabulary."""

    task: SyntheticTask
    mono_train: list[TrainingInstance]
    mono_dev: list[TrainingInstance]
    dev_ambiguous: list[TrainingInstance]
    test_ambiguous: list[TrainingInstance]
    cfg: TransformerConfig


@functools.lru_cache(maxsize=4)
def context_setup(seed: int, train_docs: int = 64, dev_docs: int = 64, mono_docs: int = 256) -> ContextSetup:
    """Dev and test cues only use topic words that never occur in parallel training data.

    The dev split drives checkpoint selection; reports use the test split.
    """
    train = context_corpus(train_docs, seed=seed, split="seen")
    dev = context_corpus(dev_docs, seed=1000 + seed, split="unseen")
    test = context_corpus(dev_docs, seed=4000 + seed, split="unseen")
    mono = monolingual_context_corpus(mono_docs, seed=2000 + seed)
    mono_dev = monolingual_context_corpus(32, seed=3000 + seed)
    task = build_task(train, dev + test, [s for d in mono + mono_dev for s in d.sentences])
    amb = task.src_vocab.stoi[AMBIGUOUS]
    dev_amb = [i for i in task.instances(dev) if amb in i.cur_src]
    test_amb = [i for i in task.instances(test) if amb in i.cur_src]
    task.dev = task.instances(dev)
    return ContextSetup(task, task.instances(mono), task.instances(mono_dev), dev_amb, test_amb, small_config(task))


PRETRAIN = TrainSettings(max_steps=600, warmup_steps=100, dropout=False, eval_interval=25, patience=4)
FINETUNE = TrainSettings(max_steps=400, warmup_steps=100, dropout=False, eval_interval=10, patience=1000)


def pretrain_context(setup: ContextSetup, seed: int, settings: TrainSettings = PRETRAIN) -> Checkpoint:
    key = (seed, repr(settings))
    cached = _PRETRAINED.get(key)
    if cached is None or cached[0] is not setup:
        model = PretrainModel(setup.cfg, seed=seed)
        cached = (setup, pretrain(model, setup.mono_train, replace(settings, seed=seed), dev=setup.mono_dev)[0])
        _PRETRAINED[key] = cached
    return cached[1]


# pre-training is the slow part; experiments sharing a setup reuse its checkpoint
_PRETRAINED: dict = {}


def finetuned_model(
    setup: ContextSetup,
    seed: int,
    ckpt: Checkpoint | None,
    fusion: ContextFusionMode = ContextFusionMode.SUM_MEAN_POOLED,
    settings: TrainSettings = FINETUNE,
):
    """Fine-tune on the parallel corpus; ``ckpt=None`` means random context encoders."""
    model = FinetuneModel(setup.cfg, seed=seed, fusion=fusion, no_pretrain=ckpt is None)
    if ckpt is not None:
        init_finetune_from_pretrained(model, ckpt)
    result = finetune(model, setup.task.train, replace(settings, seed=seed), dev=setup.dev_ambiguous)
    return model, result


def baseline_model(setup: ContextSetup, seed: int, settings: TrainSettings = FINETUNE):
    model = NMTModel(setup.cfg, seed=seed)
    result = train(
        model, lambda b, rng: model.loss(b, rng), setup.task.train, replace(settings, seed=seed, metric="tgt"),
        setup.dev_ambiguous,
    )
    return model, result


@dataclass
class AmbiguityReport:
    loss: float
    accuracy: float
    per_instance: list[float] = field(default_factory=list)


def ambiguity_report(model, setup: ContextSetup) -> AmbiguityReport:
    """Mean NLL of the ambiguous target token and greedy pick accuracy on the test split."""
    tv = setup.task.tgt_vocab
    variants = {tv.stoi[w] for w in AMB_TRANSLATIONS}
    insts = setup.test_ambiguous
    losses = []
    for inst, nll in zip(insts, token_losses(model, insts)):
        pos = next(k for k, t in enumerate(inst.tgt) if t in variants)
        losses.append(float(nll[pos]))
    correct = 0
    for inst, out in zip(insts, greedy_decode(model, insts)):
        gold = next(t for t in inst.tgt if t in variants)
        picked = [t for t in out if t in variants]
        correct += picked == [gold]
    return AmbiguityReport(float(np.mean(losses)), correct / len(insts), losses)


LN2 = math.log(2.0)


@dataclass
class DisambiguationResult:
    baseline: AmbiguityReport
    context: AmbiguityReport
    embeddings_only: AmbiguityReport


def disambiguation(seed: int = 0) -> DisambiguationResult:
    setup = context_setup(seed)
    ckpt = pretrain_context(setup, seed)
    base, _ = baseline_model(setup, seed)
    ctx, _ = finetuned_model(setup, seed, ckpt)
    emb, _ = finetuned_model(setup, seed, ckpt, ContextFusionMode.EMBEDDINGS_ONLY)
    return DisambiguationResult(
        ambiguity_report(base, setup), ambiguity_report(ctx, setup), ambiguity_report(emb, setup)
    )


@dataclass
class TransferResult:
    pretrained_steps: int | None
    random_steps: int | None
    budget: int

    @property
    def ratio(self) -> float:
        """Steps ratio; a run that never reaches the target counts as the budget (a lower bound)."""
        if self.pretrained_steps is None:
            return math.inf
        return self.pretrained_steps / (self.random_steps if self.random_steps is not None else self.budget)


def transfer(seed: int = 0, target: float = 0.2, budget: int = 400) -> TransferResult:
    setup = context_setup(seed)
    ckpt = pretrain_context(setup, seed)
    settings = replace(FINETUNE, max_steps=budget, target_dev_loss=target)
    _, pre = finetuned_model(setup, seed, ckpt, settings=settings)
    _, rnd = finetuned_model(setup, seed, None, settings=settings)
    return TransferResult(pre.reached_target_at, rnd.reached_target_at, budget)


# --- word-by-word overfit task -------------------------------------------------


def overfit_task(seed: int = 0) -> SyntheticTask:
    """32 training documents of 4 sentences; dev is 8 held-out documents."""
    return build_task(overfit_corpus(seed=seed), overfit_corpus(num_docs=8, seed=seed + 1))


OVERFIT = TrainSettings(
    max_steps=2000, budget_tokens=1024, warmup_steps=200, dropout=False, eval_interval=50, patience=1000
)


@dataclass
class OverfitResult:
    steps: int
    train_loss: float
    exact_match: float


def overfit_baseline(seed: int = 0, target: float = 0.05) -> OverfitResult:
    """Train until the training-set loss drops below ``target`` (or the step budget runs out)."""
    task = overfit_task(seed)
    model = NMTModel(small_config(task), seed=seed)
    settings = replace(OVERFIT, seed=seed, metric="tgt", target_dev_loss=target)
    result = train(model, lambda b, rng: model.loss(b, rng), task.train, settings, task.train)
    out = greedy_decode(model, task.train)
    exact = sum(list(o) == list(i.tgt) for o, i in zip(out, task.train)) / len(task.train)
    loss = evaluate(lambda b, rng: model.loss(b), make_batches(task.train, OVERFIT.budget_tokens, 0), "tgt")
    return OverfitResult(result.steps, loss, exact)


def overfit_joint(seed: int = 0, steps: int = 400):
    """Joint pre+next training; returns the training-set loss breakdown."""
    task = overfit_task(seed)
    model = JointModel(small_config(task), seed=seed)
    weights = JointLossWeights.for_mode("pre+next")
    train_joint_step1(model, task.train, weights, replace(OVERFIT, seed=seed, max_steps=steps))
    return joint_forward(model, Batch.from_instances(task.train), weights), len(task.src_vocab)


@dataclass
class TwoStepResult:
    step1_dev: float
    step2_dev: float

    @property
    def relative_change(self) -> float:
        return self.step2_dev / self.step1_dev - 1.0


def two_step(seed: int = 0) -> TwoStepResult:
    """Dev translation loss of the step-1 joint model and of its step-2 continuation."""
    task = overfit_task(0)
    model = JointModel(small_config(task), seed=seed)
    settings = replace(OVERFIT, seed=seed, max_steps=400, eval_interval=25, patience=4)
    train_joint_step1(model, task.train, JointLossWeights.for_mode("pre+next"), settings, dev=task.dev)
    dev = make_batches(task.dev, settings.budget_tokens, 0)
    nmt = model.nmt_path()
    before = evaluate(lambda b, rng: nmt.loss(b), dev, "tgt")
    nmt, _ = train_joint_step2(model, task.train, settings, dev=task.dev)
    after = evaluate(lambda b, rng: nmt.loss(b), dev, "tgt")
    return TwoStepResult(before, after)
