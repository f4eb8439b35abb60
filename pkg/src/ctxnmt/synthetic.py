"""Small generated corpora with known structure.

``overfit_corpus``
    Random sentences translated word by word (``w17`` -> ``x17``).
``context_corpus``
    Two-sentence documents: a cue sentence followed by a sentence holding
    the ambiguous word ``amb``.  The cue sentence uses words of one of two
    topics (``a*`` or ``b*``) and ``amb`` translates to ``ambA`` or ``ambB``
    accordingly, so only the previous sentence decides it.  Topic words are
    split in a ``seen`` and an ``unseen`` half so held-out documents can cue
    with words absent from the parallel training data.
``monolingual_context_corpus``
    Source-only documents whose sentences share one topic, drawing from all
    topic words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus.documents import Document, ParallelDocument
from .corpus.instances import TrainingInstance, extract_instances
from .corpus.vocab import RESERVED, Vocabulary

AMBIGUOUS = "amb"
AMB_TRANSLATIONS = ("ambA", "ambB")


def _translate_word(w: str) -> str:
    if w[0] == "w":
        return "x" + w[1:]
    if w[0] in TOPIC_PREFIX:
        return w.upper()
    if w[0] == "f":
        return "g" + w[1:]
    return w


def overfit_corpus(
    num_docs: int = 32, sents_per_doc: int = 4, num_words: int = 40, min_len: int = 3, max_len: int = 6, seed: int = 0
) -> list[ParallelDocument]:
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(num_docs):
        src, tgt = [], []
        for _ in range(sents_per_doc):
            n = int(rng.integers(min_len, max_len + 1))
            words = [f"w{int(i)}" for i in rng.integers(0, num_words, size=n)]
            src.append(" ".join(words))
            tgt.append(" ".join(_translate_word(w) for w in words))
        docs.append(ParallelDocument(Document(f"d{d}", src), Document(f"d{d}", tgt)))
    return docs


TOPIC_PREFIX = ("a", "b")


def topic_words(topic: int, count: int) -> list[str]:
    return [f"{TOPIC_PREFIX[topic]}{k}" for k in range(count)]


def _cue_sentence(
    rng: np.random.Generator, topic: int, pool: Sequence[int], words_per_cue: int, num_fillers: int
) -> list[str]:
    picks = rng.choice(len(pool), size=words_per_cue, replace=False)
    words = [f"{TOPIC_PREFIX[topic]}{pool[int(k)]}" for k in picks]
    words.append(f"f{int(rng.integers(0, num_fillers))}")
    order = rng.permutation(len(words))
    return [words[k] for k in order]


def word_pool(split: str, topic_size: int) -> list[int]:
    """Topic-word indices: ``seen`` (first half), ``unseen`` (second half) or ``all``."""
    half = topic_size // 2
    return {"seen": list(range(half)), "unseen": list(range(half, topic_size)), "all": list(range(topic_size))}[split]


def context_corpus(
    num_docs: int = 64,
    seed: int = 0,
    split: str = "seen",
    topic_size: int = 12,
    words_per_cue: int = 2,
    num_fillers: int = 4,
) -> list[ParallelDocument]:
    """Cue/ambiguous document pairs, topics balanced 50/50."""
    rng = np.random.default_rng(seed)
    pool = word_pool(split, topic_size)
    docs = []
    for d in range(num_docs):
        topic = d % 2
        cue = _cue_sentence(rng, topic, pool, words_per_cue, num_fillers)
        amb = [AMBIGUOUS, f"f{int(rng.integers(0, num_fillers))}"]
        src = [" ".join(cue), " ".join(amb)]
        tgt = [
            " ".join(_translate_word(w) for w in cue),
            " ".join(AMB_TRANSLATIONS[topic] if w == AMBIGUOUS else _translate_word(w) for w in amb),
        ]
        docs.append(ParallelDocument(Document(f"c{d}", src), Document(f"c{d}", tgt)))
    order = rng.permutation(num_docs)
    return [docs[i] for i in order]


def monolingual_context_corpus(
    num_docs: int = 128,
    sents_per_doc: int = 4,
    seed: int = 0,
    topic_size: int = 12,
    words_per_cue: int = 2,
    num_fillers: int = 4,
) -> list[Document]:
    """Documents whose sentences all draw topic words from one topic."""
    rng = np.random.default_rng(seed)
    pool = word_pool("all", topic_size)
    docs = []
    for d in range(num_docs):
        topic = d % 2
        sents = [
            " ".join(_cue_sentence(rng, topic, pool, words_per_cue, num_fillers)) for _ in range(sents_per_doc)
        ]
        docs.append(Document(f"m{d}", sents))
    return docs


def word_vocab(sentences) -> Vocabulary:
    seen: dict[str, None] = {}
    for s in sentences:
        for w in s.split():
            seen.setdefault(w, None)
    return Vocabulary(list(RESERVED) + sorted(seen))


@dataclass
class SyntheticTask:
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    train: list[TrainingInstance]
    dev: list[TrainingInstance]

    def instances(self, docs) -> list[TrainingInstance]:
        out = []
        for doc in docs:
            out += extract_instances(
                doc,
                lambda s: self.src_vocab.encode(s.split()),
                (lambda s: self.tgt_vocab.encode(s.split())) if isinstance(doc, ParallelDocument) else None,
            )
        return out


def build_task(train_docs, dev_docs=(), extra_src=()) -> SyntheticTask:
    src_lines = [s for d in list(train_docs) + list(dev_docs) for s in d.source.sentences] + list(extra_src)
    tgt_lines = [s for d in list(train_docs) + list(dev_docs) for s in d.target.sentences]
    task = SyntheticTask(word_vocab(src_lines), word_vocab(tgt_lines), [], [])
    task.train = task.instances(train_docs)
    task.dev = task.instances(dev_docs)
    return task
