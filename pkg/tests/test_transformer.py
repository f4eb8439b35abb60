import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instances, tiny_config
from ctxnmt.corpus import Batch
from ctxnmt.numerics import ContractError, ShapeError, Tensor, backward
from ctxnmt.numerics.gradcheck import check_gradients
from ctxnmt.transformer import (
    AttentionMask,
    DecoderStack,
    EncoderStack,
    MultiHeadAttention,
    NMTModel,
    TransformerConfig,
    decode,
    encode,
    encoder_body_params,
    new_embedding,
    positional_encoding,
)


def stacks(cfg, seed=0):
    rng = np.random.default_rng(seed)
    enc = EncoderStack(cfg, new_embedding(rng, cfg.src_vocab, cfg.d_model), rng)
    dec = DecoderStack(cfg, new_embedding(rng, cfg.tgt_vocab, cfg.d_model), rng)
    return enc, dec


# --- positional encoding -----------------------------------------------------


def test_positional_encoding_values():
    pe = positional_encoding(5, 4)
    assert np.array_equal(pe[0], [0.0, 1.0, 0.0, 1.0])
    assert pe[1, 0] == pytest.approx(math.sin(1.0), abs=1e-15)
    assert pe[1, 0] == pytest.approx(0.8415, abs=1e-4)
    assert pe[3, 3] == pytest.approx(math.cos(3 / 10000 ** (2 / 4)), abs=1e-15)
    assert np.all(np.abs(positional_encoding(64, 16)) <= 1.0)


# --- masks -------------------------------------------------------------------


def test_causal_mask():
    m = AttentionMask.causal(4).allowed
    for i in range(4):
        for j in range(4):
            assert m[i, j] == (j <= i)


def test_padding_mask_forbids_pads_only():
    m = AttentionMask.padding(np.array([True, True, False]), 2).allowed
    assert m.shape == (2, 3)
    assert np.array_equal(m, [[True, True, False]] * 2)


def test_combined_mask_is_intersection():
    valid = np.array([True, True, False])
    m = AttentionMask.combined(valid).allowed
    assert np.array_equal(m, AttentionMask.causal(3).allowed & valid[None, :])


# --- attention ---------------------------------------------------------------


def identity_attention(d, heads=1):
    mha = MultiHeadAttention(np.random.default_rng(0), d, heads)
    for lin in (mha.q, mha.k, mha.v, mha.o):
        lin.weight.data[...] = np.eye(d)
        lin.bias.data[...] = 0.0
    return mha


def test_attention_matches_scaled_dot_product_oracle():
    rng = np.random.default_rng(1)
    q, k, v = rng.normal(size=(3, 6)), rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    scores = q @ k.T / math.sqrt(6)
    w = np.exp(scores - scores.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    out, weights = identity_attention(6).attend(Tensor(q), Tensor(k), Tensor(v))
    assert np.allclose(out.data, w @ v, atol=1e-13, rtol=0)
    assert np.allclose(weights.data[0, 0], w, atol=1e-14, rtol=0)


def test_single_key_returns_projected_value():
    rng = np.random.default_rng(2)
    mha = MultiHeadAttention(rng, 8, 2)
    v = rng.normal(size=(1, 8))
    out = mha(Tensor(rng.normal(size=(3, 8))), Tensor(v))
    ref = mha.o(mha.v(Tensor(v))).data
    assert np.allclose(out.data, np.repeat(ref, 3, axis=0), atol=1e-13)


def test_duplicate_keys_do_not_change_output():
    rng = np.random.default_rng(3)
    mha = MultiHeadAttention(rng, 8, 2)
    q, kv = rng.normal(size=(2, 8)), rng.normal(size=(1, 8))
    single = mha(Tensor(q), Tensor(kv)).data
    doubled = mha(Tensor(q), Tensor(np.repeat(kv, 2, axis=0))).data
    assert np.allclose(single, doubled, atol=1e-13)


def test_attention_rows_are_probability_vectors_with_exact_masked_zeros():
    rng = np.random.default_rng(4)
    mha = MultiHeadAttention(rng, 8, 4)
    valid = np.array([[True, True, False, True, False]])
    x = Tensor(rng.normal(size=(1, 5, 8)))
    _, w = mha.attend(x, x, mask=AttentionMask.padding(valid, 5))
    w = w.data
    assert np.all(w >= 0)
    assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-9, rtol=0)
    assert np.all(w[..., ~valid[0]] == 0.0)


def test_attention_fully_masked_row_is_contract_error():
    mha = MultiHeadAttention(np.random.default_rng(0), 4, 1)
    x = Tensor(np.ones((2, 4)))
    with pytest.raises(ContractError):
        mha.attend(x, x, mask=np.array([[True, False], [False, False]]))


def test_attention_width_mismatch_is_shape_error():
    mha = MultiHeadAttention(np.random.default_rng(0), 4, 1)
    with pytest.raises(ShapeError):
        mha(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))))


def test_attention_gradients():
    rng = np.random.default_rng(5)
    mha = MultiHeadAttention(rng, 4, 2)
    x = Tensor(rng.normal(size=(1, 3, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(1, 3, 4)))
    from ctxnmt.numerics import ops

    rows = check_gradients(lambda: ops.sum(ops.mul(mha(x, x), w)), [("x", x)] + mha.named_parameters(), num_samples=6)
    assert max(r[4] for r in rows) < 1e-6


# --- encoder / decoder -------------------------------------------------------


def test_encode_shape_determinism_and_length_one(cfg):
    enc, _ = stacks(cfg)
    out = encode([7, 8, 9], enc)
    assert out.shape == (3, cfg.d_model)
    assert np.array_equal(out.data, encode([7, 8, 9], stacks(cfg)[0]).data)
    assert np.all(np.isfinite(encode([5], enc).data))


def test_encode_padding_invariance(cfg):
    enc, _ = stacks(cfg)
    valid = np.array([True, True, True, False])
    a = encode([7, 8, 9, 0], enc, valid).data
    b = encode([7, 8, 9, 13], enc, valid).data
    assert np.abs(a[:3] - b[:3]).max() < 1e-9


def test_batched_encode_matches_unbatched(cfg):
    enc, _ = stacks(cfg)
    ids = np.array([[7, 8, 9], [10, 11, 0]])
    valid = ids != 0
    batched = enc(ids, valid).data
    assert np.allclose(batched[1, :2], encode([10, 11], enc).data, atol=1e-12)


def test_out_of_range_token_names_position(cfg):
    enc, _ = stacks(cfg)
    with pytest.raises(IndexError, match="position 1"):
        encode([3, 99, 4], enc)


def test_decode_causality_and_shape(cfg):
    enc, dec = stacks(cfg)
    memory = encode([6, 7, 8, 9], enc)
    base = decode([1, 6, 7, 8, 9], memory, dec).data
    assert base.shape == (5, cfg.tgt_vocab)
    changed = decode([1, 6, 7, 15, 9], memory, dec).data
    assert np.array_equal(base[:3], changed[:3])
    assert not np.allclose(base[3:], changed[3:])


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(0, 5), st.integers(6, 19))
def test_decoder_prefix_invariance(length, pos, token):
    pos = min(pos, length - 1)
    cfg = tiny_config(num_layers=1)
    enc, dec = stacks(cfg)
    memory = encode([6, 7], enc)
    ids = [1] + [6 + k for k in range(length - 1)]
    alt = list(ids)
    alt[pos] = token
    a, b = decode(ids, memory, dec).data, decode(alt, memory, dec).data
    assert np.array_equal(a[:pos], b[:pos])


def test_decode_sensitive_to_memory(cfg):
    enc, dec = stacks(cfg)
    memory = encode([6, 7, 8], enc)
    base = decode([1, 6, 7], memory, dec).data
    bumped = Tensor(memory.data + 1e-3 * np.random.default_rng(0).normal(size=memory.shape))
    moved = decode([1, 6, 7], bumped, dec).data
    assert np.all(np.abs(base - moved).max(axis=-1) > 0)


def test_decode_empty_target_is_contract_error(cfg):
    enc, dec = stacks(cfg)
    with pytest.raises(ContractError):
        decode([], encode([6], enc), dec)


def test_pre_norm_runs_and_differs(cfg):
    post = NMTModel(cfg, seed=0)
    pre = NMTModel(tiny_config(pre_norm=True), seed=0)
    b = Batch.from_instances(random_instances(3))
    assert np.isfinite(pre.loss(b).joint)
    assert pre.loss(b).joint != post.loss(b).joint


def test_nmt_loss_gradients_reach_every_parameter(cfg, batch):
    model = NMTModel(cfg, seed=0)
    backward(model.loss(batch).tensor)
    for name, p in model.named_parameters():
        assert p.grad is not None and np.any(p.grad != 0), name


# --- parameter counting ------------------------------------------------------


def test_encoder_body_formula_matches_storage():
    for pre_norm in (False, True):
        cfg = tiny_config(pre_norm=pre_norm, num_layers=3)
        enc, dec = stacks(cfg)
        d, f = cfg.d_model, cfg.d_ff
        per_layer = 4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d
        assert enc.body_size() == encoder_body_params(cfg) == 3 * per_layer + (2 * d if pre_norm else 0)
        dec.body_size()


def test_toy_config_hand_count():
    cfg = TransformerConfig(d_model=8, d_ff=16, num_layers=1, num_heads=2, src_vocab=10, tgt_vocab=10, max_len=8)
    attn = 4 * (8 * 8 + 8)  # q, k, v, o weights + biases
    ffn = (8 * 16 + 16) + (16 * 8 + 8)
    enc_layer = attn + ffn + 2 * (8 + 8)
    dec_layer = 2 * attn + ffn + 3 * (8 + 8)
    embeddings = 10 * 8 + 10 * 8  # output projection tied to the target table
    assert (attn, ffn, enc_layer, dec_layer) == (288, 280, 600, 904)
    assert NMTModel(cfg).num_parameters() == embeddings + enc_layer + dec_layer == 1664


def test_untied_output_adds_projection():
    tied = NMTModel(tiny_config()).num_parameters()
    untied_model = NMTModel(tiny_config(tie_output=False))
    assert untied_model.num_parameters() == tied + 16 * 20
    untied_model.decoder.body_size()


def test_config_rejects_indivisible_heads():
    with pytest.raises(ValueError):
        TransformerConfig(d_model=10, num_heads=3)
