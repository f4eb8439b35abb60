from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxnmt.corpus import (
    BOS,
    CTX_NONE,
    EOS,
    PAD,
    SEP,
    UNK,
    AlignmentError,
    Batch,
    BPEModel,
    CorpusError,
    Document,
    ParallelDocument,
    TrainingInstance,
    apply_bpe,
    batch_by_tokens,
    build_vocab,
    concat_context,
    detokenize,
    extract_instances,
    format_documents,
    pair_documents,
    parse_documents,
    parse_instances,
    parse_parallel_tsv,
    read_instances,
    train_bpe,
    write_instances,
)
from ctxnmt.corpus.bpe import EOW

from conftest import random_instances


# --- documents ---------------------------------------------------------------


def test_parse_documents_blocks():
    docs = parse_documents("a\nb\n\nc\n")
    assert [len(d) for d in docs] == [2, 1]
    assert parse_documents("") == []


def test_parse_documents_three_blocks_of_eleven():
    text = "\n\n".join("\n".join(f"s{b}_{i}" for i in range(11)) for b in range(3)) + "\n"
    assert [len(d) for d in parse_documents(text)] == [11, 11, 11]


def test_parse_documents_headers_and_empty_docs(caplog):
    docs = parse_documents("#doc id=x\nhello\n\n#doc id=empty\n\n#doc id=y\nworld\n")
    assert [d.doc_id for d in docs] == ["x", "y"]
    assert "empty" in caplog.text


def test_invalid_utf8_reports_byte_offset():
    with pytest.raises(CorpusError, match="byte offset 4"):
        parse_documents(b"abc\n\xff\n")


def test_format_parse_round_trip():
    docs = [Document("d0", ["a b", "c"]), Document("d1", ["e"])]
    assert parse_documents(format_documents(docs)) == docs


def test_parallel_tsv_and_misalignment():
    docs = parse_parallel_tsv("a\tx\nb\ty\n\nc\tz\n")
    assert [d.target.sentences for d in docs] == [["x", "y"], ["z"]]
    with pytest.raises(AlignmentError):
        parse_parallel_tsv("a\tx\tq\n")
    with pytest.raises(AlignmentError, match="'d'"):
        ParallelDocument(Document("d", ["a", "b"]), Document("d", ["x"]))
    with pytest.raises(AlignmentError):
        pair_documents([Document("a", ["x"])], [])


# --- instances ---------------------------------------------------------------


def ids_doc(n):
    return Document("d", [(10 * (i + 1),) for i in range(n)])


def test_extract_boundaries():
    three = extract_instances(ids_doc(3))
    assert len(three) == 3
    assert three[0].prev_src is None and three[2].next_src is None
    one = extract_instances(ids_doc(1))
    assert len(one) == 1 and one[0].prev_src is None and one[0].next_src is None


def test_extract_index_arithmetic():
    src = Document("d", [(1,), (2,), (3,), (4,)])
    tgt = Document("d", [(11,), (12,), (13,), (14,)])
    inst = extract_instances(ParallelDocument(src, tgt))[2]
    assert (inst.prev_src, inst.cur_src, inst.next_src, inst.tgt) == ((2,), (3,), (4,), (13,))


def test_extract_encodes_and_truncates(caplog):
    doc = Document("d", ["a b c d", "a"])
    insts = extract_instances(doc, lambda s: [len(w) for w in s.split()], max_len=2)
    assert insts[0].cur_src == (1, 1) and "truncated" in caplog.text
    assert insts[0].tgt is None


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 7), min_size=1, max_size=6))
def test_instance_conservation_and_boundaries(lengths):
    docs = [ids_doc(n) for n in lengths]
    insts = [i for d in docs for i in extract_instances(d)]
    assert len(insts) == sum(lengths)
    assert sum(i.prev_src is None for i in insts) == len(docs)
    assert sum(i.next_src is None for i in insts) == len(docs)


def test_ctx_none_placeholder():
    inst = TrainingInstance((7,))
    assert inst.prev_or_none == (CTX_NONE,) and inst.next_or_none == (CTX_NONE,)


def test_concat_context():
    inst = TrainingInstance((7,), prev_src=(5, 6), next_src=(9,), tgt=(8,))
    out = concat_context(inst)
    assert out.cur_src == (5, 6, SEP, 7)
    assert out.prev_src is None and out.next_src is None and out.tgt == (8,)
    assert len(out.cur_src) == 2 + 1 + 1
    alone = TrainingInstance((7,), tgt=(8,))
    assert concat_context(alone) is alone


def test_instance_file_round_trip(tmp_path):
    insts = random_instances(7) + [TrainingInstance((6,))]
    write_instances(insts, tmp_path / "x.inst")
    assert read_instances(tmp_path / "x.inst") == insts
    with pytest.raises(ValueError, match="line 1"):
        parse_instances("1\t2\n")


# --- BPE ---------------------------------------------------------------------


def brute_force_first_merge(corpus):
    pairs = Counter()
    for word in corpus.split():
        symbols = list(word[:-1]) + [word[-1] + EOW]
        for a, b in zip(symbols, symbols[1:]):
            pairs[a, b] += 1
    return min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def test_bpe_first_merge_matches_brute_force():
    assert brute_force_first_merge("aaab aaab") == ("a", "a")
    assert train_bpe(["aaab aaab"], 1).merges == [("a", "a")]


def test_bpe_zero_merges_is_character_level():
    model = train_bpe(["hello world"], 0)
    assert model.merges == []
    assert model.segment_word("abc") == ("a", "b", "c" + EOW)
    assert apply_bpe(model, "abc") == ["a@@", "b@@", "c"]


def test_bpe_known_and_unseen_words():
    model = train_bpe(["low low low lower"], 20)
    assert apply_bpe(model, "low") == ["low"]
    unseen = apply_bpe(model, "lowz")
    assert len(unseen) > 1 and detokenize(unseen) == "lowz"


def test_bpe_errors():
    with pytest.raises(ValueError):
        train_bpe([""], 3)
    with pytest.raises(ValueError):
        train_bpe(["a"], -1)


def test_bpe_deterministic_and_serializable(tmp_path):
    corpus = ["the cat sat on the mat", "the hat"]
    a, b = train_bpe(corpus, 10), train_bpe(corpus, 10)
    assert a.to_text() == b.to_text()
    a.save(tmp_path / "m")
    assert BPEModel.load(tmp_path / "m").merges == a.merges


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.text(alphabet="abcde", min_size=1, max_size=6), min_size=1, max_size=8),
    st.integers(0, 15),
)
def test_bpe_reversible_and_reapplication_stable(words, merges):
    sentence = " ".join(words)
    model = train_bpe([sentence], merges)
    seg = apply_bpe(model, sentence)
    assert detokenize(seg) == sentence
    assert apply_bpe(model, detokenize(seg)) == seg


# --- vocabulary --------------------------------------------------------------


def test_reserved_ids():
    assert (PAD, UNK, BOS, EOS, CTX_NONE) == (0, 1, 2, 3, 4)


def test_vocab_cutoff():
    v = build_vocab([["a", "a", "b"]], max_size=6 + 1)
    assert "a" in v and "b" not in v
    assert v.encode(["b"]) == [UNK]


def test_vocab_ordering_and_bijection(tmp_path):
    v = build_vocab([["b", "c", "a", "c"]])
    assert v.itos[6:] == ["c", "a", "b"]
    assert v.decode(v.encode(["a", "c"])) == ["a", "c"]
    v.save(tmp_path / "v")
    from ctxnmt.corpus import Vocabulary

    assert Vocabulary.load(tmp_path / "v") == v
    assert v.unk_rate([["a", "zz"]]) == 0.5
    assert all(i < len(v) for i in v.encode(["q", "a", "b"]))


def test_vocab_min_freq():
    v = build_vocab([["a", "a", "b"]], min_freq=2)
    assert "a" in v and "b" not in v


# --- batching ----------------------------------------------------------------


def test_singleton_batches_when_budget_is_one_instance():
    insts = [TrainingInstance((6, 7), tgt=(8,)) for _ in range(5)]
    batches = batch_by_tokens(insts, budget_tokens=3)
    assert [len(b) for b in batches] == [1] * 5


def test_batch_budget_error_names_instance():
    with pytest.raises(ValueError, match="instance 1"):
        batch_by_tokens([TrainingInstance((6,)), TrainingInstance((6,) * 9)], budget_tokens=5)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(40, 120), st.integers(0, 5))
def test_batching_conservation_budget_and_determinism(n, budget, seed):
    insts = random_instances(n, seed=seed)
    batches = batch_by_tokens(insts, budget, seed=seed)
    flat = [i for b in batches for i in b]
    assert sorted(map(id, flat)) == sorted(map(id, insts))
    assert sum(i.size() for i in flat) == sum(i.size() for i in insts)
    assert all(sum(i.size() for i in b) <= budget for b in batches)
    again = batch_by_tokens(insts, budget, seed=seed)
    assert [[id(i) for i in b] for b in batches] == [[id(i) for i in b] for b in again]


def test_batch_arrays():
    insts = [TrainingInstance((6, 7), prev_src=(8,), tgt=(9,)), TrainingInstance((6,), next_src=(7, 8), tgt=(9, 10))]
    b = Batch.from_instances(insts)
    assert np.array_equal(b.src, [[6, 7], [6, 0]])
    assert np.array_equal(b.prev, [[8], [CTX_NONE]])
    assert np.array_equal(b.prev_absent, [False, True])
    assert np.array_equal(b.tgt.inputs, [[BOS, 9, 0], [BOS, 9, 10]])
    assert np.array_equal(b.tgt.targets, [[9, EOS, 0], [9, 10, EOS]])
    assert b.size == 2
