import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_instances, tiny_config
from ctxnmt.corpus import CTX_NONE, Batch, Document, TrainingInstance, extract_instances
from ctxnmt.ctxpretrain import (
    ContextAttention,
    ContextFusionMode,
    FinetuneModel,
    PretrainModel,
    explicit_context_attend,
    finetune,
    finetune_forward,
    fuse_context,
    init_finetune_from_pretrained,
    mean_pool,
    pretrain,
    pretrain_forward,
    pretrain_name_mapping,
)
from ctxnmt.jointmt import ConfigurationError
from ctxnmt.numerics import ShapeError, Tensor, backward
from ctxnmt.runtime.checkpoint import CheckpointError, CheckpointShapeError
from ctxnmt.runtime.models import to_checkpoint
from ctxnmt.training import TrainSettings
from ctxnmt.transformer import NMTModel, encoder_body_params


# --- fusion ------------------------------------------------------------------


def test_no_context_is_identity():
    e = Tensor(np.random.default_rng(0).normal(size=(4, 8)))
    assert np.array_equal(fuse_context(e, None, None).data, e.data)


def test_constant_context_adds_vector():
    rng = np.random.default_rng(1)
    e, v = rng.normal(size=(3, 8)), rng.normal(size=8)
    out = fuse_context(Tensor(e), Tensor(np.tile(v, (5, 1))), None).data
    assert np.allclose(out, e + v, atol=1e-15)


def test_fusion_matches_pool_broadcast_oracle():
    rng = np.random.default_rng(2)
    e, p, n = rng.normal(size=(2, 4, 8)), rng.normal(size=(2, 3, 8)), rng.normal(size=(2, 5, 8))
    pv = np.array([[True, True, False], [True, True, True]])
    nv = np.array([[True] * 5, [True, False, False, False, False]])
    ref = np.empty_like(e)
    for b in range(2):
        pool_p = sum(p[b, j] for j in range(3) if pv[b, j]) / pv[b].sum()
        pool_n = sum(n[b, j] for j in range(5) if nv[b, j]) / nv[b].sum()
        for i in range(4):
            ref[b, i] = e[b, i] + pool_p + pool_n
    out = fuse_context(Tensor(e), Tensor(p), Tensor(n), prev_valid=pv, next_valid=nv).data
    assert np.abs(out - ref).max() <= 1e-12


def test_fusion_additivity():
    rng = np.random.default_rng(3)
    e, p, n = (Tensor(rng.normal(size=s)) for s in ((4, 8), (2, 8), (6, 8)))
    both = fuse_context(e, p, n).data
    parts = fuse_context(e, p, None).data + fuse_context(Tensor(np.zeros((4, 8))), None, n).data
    assert np.allclose(both, parts, atol=1e-13, rtol=0)


def test_fusion_modes_and_errors():
    e = Tensor(np.ones((2, 4)))
    assert fuse_context(e, Tensor(np.ones((3, 4))), None, "embeddings_only") is e
    with pytest.raises(ShapeError):
        fuse_context(e, Tensor(np.ones((3, 5))), None)
    with pytest.raises(ValueError):
        fuse_context(e, None, None, "explicit_attention")


def test_mean_pool_absent_rows_are_zero():
    s = Tensor(np.ones((2, 3, 4)))
    out = mean_pool(s, present=np.array([True, False])).data
    assert np.array_equal(out, [[1.0] * 4, [0.0] * 4])


def test_explicit_attention_single_context_state():
    rng = np.random.default_rng(4)
    block = ContextAttention(rng, 8, 2)
    cur, ctx = Tensor(rng.normal(size=(3, 8))), Tensor(rng.normal(size=(1, 8)))
    out = explicit_context_attend(cur, ctx, block)
    assert out.shape == (3, 8)
    attended = block.attn.o(block.attn.v(ctx)).data
    assert np.allclose(out.data, block.norm(Tensor(cur.data + attended)).data, atol=1e-13)


def test_explicit_attention_identity_oracle():
    rng = np.random.default_rng(5)
    block = ContextAttention(rng, 6, 1)
    for lin in (block.attn.q, block.attn.k, block.attn.v, block.attn.o):
        lin.weight.data[...] = np.eye(6)
    cur, ctx = rng.normal(size=(3, 6)), rng.normal(size=(4, 6))
    s = cur @ ctx.T / math.sqrt(6)
    w = np.exp(s - s.max(1, keepdims=True))
    w /= w.sum(1, keepdims=True)
    h = cur + w @ ctx
    ref = (h - h.mean(1, keepdims=True)) / np.sqrt(h.var(1, keepdims=True) + 1e-6)
    assert np.allclose(explicit_context_attend(Tensor(cur), Tensor(ctx), block).data, ref, atol=1e-12)


def test_explicit_attention_empty_context_rejected():
    block = ContextAttention(np.random.default_rng(0), 4, 1)
    with pytest.raises(ShapeError):
        explicit_context_attend(Tensor(np.ones((2, 4))), Tensor(np.ones((0, 4))), block)


# --- pre-training ------------------------------------------------------------


def mono(n=6, seed=0):
    return [TrainingInstance(i.cur_src, i.prev_src, i.next_src) for i in random_instances(n, seed=seed)]


@pytest.mark.parametrize("mode", ["two_encoders", "shared_encoder"])
def test_pretrain_loss_is_unit_sum(cfg, mode):
    bd = pretrain_forward(PretrainModel(cfg, encoder_mode=mode), Batch.from_instances(mono()))
    assert bd.joint == bd.loss_pre + bd.loss_next and bd.loss_tgt is None


def test_shared_encoder_feeds_identical_memory(cfg, monkeypatch):
    model = PretrainModel(cfg, encoder_mode="shared_encoder")
    assert model.next_encoder is model.pre_encoder
    b = Batch.from_instances(mono())
    enc_calls = []
    original_enc = type(model.pre_encoder).__call__
    monkeypatch.setattr(
        type(model.pre_encoder), "__call__", lambda self, *a, **k: enc_calls.append(1) or original_enc(self, *a, **k)
    )
    pretrain_forward(model, b)
    assert len(enc_calls) == 1


def test_shared_vs_two_encoder_sizes(cfg):
    two = PretrainModel(cfg).num_parameters()
    shared = PretrainModel(cfg, encoder_mode="shared_encoder").num_parameters()
    assert two - shared == encoder_body_params(cfg)


def test_pretrain_zero_steps_is_initialization(cfg):
    model = PretrainModel(cfg, seed=3)
    init = model.state_dict()
    ckpt, _ = pretrain(model, mono(), TrainSettings(max_steps=0))
    assert all(np.array_equal(init[k], ckpt.params[k]) for k in init)


def test_pretrain_metrics_log_separates_components(cfg):
    import io

    buf = io.StringIO()
    pretrain(PretrainModel(cfg), mono(), TrainSettings(max_steps=3, warmup_steps=2, dropout=False), metrics_out=buf)
    rows = [line.split() for line in buf.getvalue().splitlines()]
    assert len(rows) == 3
    for step, lr, tgt, pre, nxt, joint in rows:
        assert tgt == "-" and float(joint) == float(pre) + float(nxt)


def test_pretrain_targets_are_ignored(cfg):
    with_tgt = random_instances(6)
    model = PretrainModel(cfg, seed=1)
    model2 = PretrainModel(cfg, seed=1)
    s = TrainSettings(max_steps=2, warmup_steps=2, dropout=False)
    a, _ = pretrain(model, with_tgt, s)
    b, _ = pretrain(model2, mono(), s)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_deterministic_next_and_entropy_floor_for_previous():
    """Two-sentence documents: s1 = f(s0) with f two-to-one.

    Next-sentence prediction is deterministic; previous-sentence prediction
    keeps one bit of uncertainty, so its loss cannot go below the empirical
    conditional entropy of the training set.
    """
    rng = np.random.default_rng(0)
    k = 8
    docs = []
    for d in range(96):
        w = int(rng.integers(0, k))
        docs.append(Document(f"d{d}", [(6 + w,), (6 + k + w // 2,)]))
    insts = [i for d in docs for i in extract_instances(d)]
    vocab = 6 + k + k // 2
    cfg = tiny_config(d_model=16, d_ff=32, num_layers=1, src_vocab=vocab, tgt_vocab=vocab, max_len=4)
    model = PretrainModel(cfg, seed=0)
    settings = TrainSettings(
        max_steps=400, budget_tokens=400, warmup_steps=50, lr_factor=2.0, dropout=False, eval_interval=1000
    )
    pretrain(model, insts, settings)
    bd = pretrain_forward(model, Batch.from_instances(insts))

    pairs = Counter((i.cur_src, i.prev_src) for i in insts if i.prev_src is not None)
    given = Counter(i.cur_src for i in insts if i.prev_src is not None)
    nats = -sum(c * math.log(c / given[cur]) for (cur, _), c in pairs.items())
    tokens = sum(len(i.prev_or_none) + 1 for i in insts)
    floor = nats / tokens
    assert floor > 0.1
    assert bd.loss_next < 0.1
    assert floor - 1e-9 <= bd.loss_pre < floor + 0.01


# --- fine-tuning -------------------------------------------------------------


def pretrained(cfg, mode="two_encoders", seed=0):
    return to_checkpoint(PretrainModel(cfg, seed=seed, encoder_mode=mode))


def test_finetune_requires_explicit_no_pretrain_flag(cfg, batch):
    with pytest.raises(ConfigurationError):
        finetune_forward(FinetuneModel(cfg), batch)
    assert math.isfinite(finetune_forward(FinetuneModel(cfg, no_pretrain=True), batch).joint)


def test_finetune_param_count(cfg):
    base = NMTModel(cfg).num_parameters()
    assert FinetuneModel(cfg).num_parameters() == base + 2 * encoder_body_params(cfg)


def test_init_copies_context_encoders_and_keeps_fresh_decoder(cfg):
    ckpt = pretrained(cfg, seed=5)
    model = init_finetune_from_pretrained(FinetuneModel(cfg, seed=9), ckpt)
    own = dict(model.named_parameters())
    for name in ckpt.params:
        if name == "src_embedding" or name.startswith(("pre_encoder.", "next_encoder.")):
            assert np.array_equal(own[name].data, ckpt.params[name]), name
    assert model.nmt_encoder.embedding is model.src_embedding
    blob = [v.ravel() for v in ckpt.params.values()]
    for name, p in own.items():
        if name.startswith("decoder.layers") and name.endswith("weight"):
            assert not any(a.size == p.size and np.array_equal(a, p.data.ravel()) for a in blob), name


def test_init_from_shared_encoder_populates_both(cfg):
    ckpt = pretrained(cfg, "shared_encoder", seed=6)
    mapping = pretrain_name_mapping(ckpt)
    assert all(len(v) == 2 for k, v in mapping.items() if k.startswith("pre_encoder."))
    model = init_finetune_from_pretrained(FinetuneModel(cfg), ckpt)
    for (n1, p1), (n2, p2) in zip(model.pre_encoder.named_parameters(), model.next_encoder.named_parameters()):
        assert np.array_equal(p1.data, p2.data)


def test_init_errors(cfg):
    with pytest.raises(CheckpointError):
        init_finetune_from_pretrained(FinetuneModel(cfg), to_checkpoint(NMTModel(cfg)))
    with pytest.raises(CheckpointShapeError, match="vocabulary"):
        init_finetune_from_pretrained(FinetuneModel(tiny_config(src_vocab=21)), pretrained(cfg))
    with pytest.raises(CheckpointShapeError, match="d_model"):
        init_finetune_from_pretrained(FinetuneModel(tiny_config(d_model=8)), pretrained(cfg))


def test_frozen_context_encoders_get_zero_gradient(cfg, batch):
    model = FinetuneModel(cfg, trainable_context_encoders=False, no_pretrain=True)
    model.zero_grad()
    backward(finetune_forward(model, batch).tensor)
    for name, p in model.context_parameters():
        assert np.all(p.grad == 0.0), name
    live = FinetuneModel(cfg, no_pretrain=True)
    live.zero_grad()
    backward(finetune_forward(live, batch).tensor)
    assert any(np.any(p.grad != 0) for _, p in live.context_parameters())


def test_frozen_finetune_leaves_context_encoders_unchanged(cfg):
    model = FinetuneModel(cfg, trainable_context_encoders=False, no_pretrain=True)
    before = {n: p.data.copy() for n, p in model.context_parameters()}
    finetune(model, random_instances(6), TrainSettings(max_steps=3, warmup_steps=2, dropout=False))
    for n, p in model.context_parameters():
        assert np.array_equal(before[n], p.data), n


def test_context_sensitivity_and_absent_placeholder(cfg):
    model = FinetuneModel(cfg, no_pretrain=True, seed=1)
    base = TrainingInstance((7, 8), prev_src=(9, 10), tgt=(11,))
    loss = lambda inst: finetune_forward(model, Batch.from_instances([inst])).joint
    assert loss(base) != loss(replace(base, prev_src=(12, 10)))
    # the absent next context pools to zero, so its placeholder content cannot matter
    b1 = Batch.from_instances([base])
    b2 = Batch.from_instances([base])
    b2.next[...] = 17
    assert finetune_forward(model, b1).joint == finetune_forward(model, b2).joint


def test_embeddings_only_ignores_context(cfg):
    model = FinetuneModel(cfg, fusion="embeddings_only", no_pretrain=True)
    a = TrainingInstance((7, 8), prev_src=(9,), next_src=(10,), tgt=(11,))
    b = replace(a, prev_src=(13, 14, 15), next_src=None)
    la = finetune_forward(model, Batch.from_instances([a])).joint
    lb = finetune_forward(model, Batch.from_instances([b])).joint
    assert la == lb


def test_explicit_attention_uses_ctx_none_states(cfg):
    model = FinetuneModel(cfg, fusion="explicit_attention", no_pretrain=True)
    inst = TrainingInstance((7, 8), tgt=(11,))
    b = Batch.from_instances([inst])
    assert b.prev[0, 0] == CTX_NONE
    assert math.isfinite(finetune_forward(model, b).joint)
    b.prev[0, 0] = 9
    assert finetune_forward(model, b).joint != finetune_forward(model, Batch.from_instances([inst])).joint


@pytest.mark.parametrize("fusion", [m.value for m in ContextFusionMode])
def test_finetune_trains_in_every_mode(cfg, fusion):
    model = init_finetune_from_pretrained(FinetuneModel(cfg, fusion=fusion), pretrained(cfg))
    res = finetune(model, random_instances(9), TrainSettings(max_steps=5, warmup_steps=2, dropout=False))
    assert res.steps == 5 and all(math.isfinite(h.joint) for h in res.history)
