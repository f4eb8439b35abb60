"""Corpus BLEU on whitespace-tokenized text.

Inputs are assumed pre-tokenized; no internal tokenizer is applied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

Reference = str | Sequence[str]


@dataclass
class BleuReport:
    precisions: list[float]
    brevity_penalty: float
    score: float
    hyp_len: int
    ref_len: int
    matches: list[int]
    totals: list[int]

    def to_record(self) -> str:
        parts = [f"bleu={self.score:.4f}"]
        parts += [f"p{i + 1}={p:.6f}" for i, p in enumerate(self.precisions)]
        parts += [f"bp={self.brevity_penalty:.6f}", f"hyp_len={self.hyp_len}", f"ref_len={self.ref_len}"]
        return " ".join(parts)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def sentence_stats(hyp: str, refs: Reference, max_order: int = 4, lowercase: bool = True) -> np.ndarray:
    """``[hyp_len, ref_len, m_1..m_N, t_1..t_N]`` for one segment.

    Counts are clipped by the maximum count over references; the reference
    length is the one closest to the hypothesis (shorter wins ties).
    """
    if isinstance(refs, str):
        refs = [refs]
    if lowercase:
        hyp = hyp.lower()
        refs = [r.lower() for r in refs]
    h = hyp.split()
    rs = [r.split() for r in refs]
    ref_len = min((abs(len(r) - len(h)), len(r)) for r in rs)[1]
    stats = np.zeros(2 + 2 * max_order, dtype=np.int64)
    stats[0], stats[1] = len(h), ref_len
    for n in range(1, max_order + 1):
        hc = _ngrams(h, n)
        clip: Counter = Counter()
        for r in rs:
            clip |= _ngrams(r, n)
        stats[1 + n] = sum(min(c, clip[g]) for g, c in hc.items())
        stats[1 + max_order + n] = max(len(h) - n + 1, 0)
    return stats


def bleu_from_stats(stats: np.ndarray, max_order: int = 4, smooth: bool = False) -> BleuReport:
    hyp_len, ref_len = int(stats[0]), int(stats[1])
    matches = [int(x) for x in stats[2 : 2 + max_order]]
    totals = [int(x) for x in stats[2 + max_order : 2 + 2 * max_order]]
    precisions = []
    for n, (m, t) in enumerate(zip(matches, totals)):
        if smooth and n > 0:
            precisions.append((m + 1) / (t + 1))
        else:
            precisions.append(m / t if t else 0.0)
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0
    if min(precisions) <= 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_order)
    return BleuReport(precisions, bp, score, hyp_len, ref_len, matches, totals)


def corpus_stats(hypotheses: Sequence[str], references: Sequence[Reference], max_order: int = 4, lowercase: bool = True) -> np.ndarray:
    if len(hypotheses) == 0:
        raise ValueError("BLEU needs at least one hypothesis")
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    return np.stack([sentence_stats(h, r, max_order, lowercase) for h, r in zip(hypotheses, references)])


def bleu(
    hypotheses: Sequence[str],
    references: Sequence[Reference],
    max_order: int = 4,
    lowercase: bool = True,
    smooth: bool = False,
) -> BleuReport:
    stats = corpus_stats(hypotheses, references, max_order, lowercase)
    return bleu_from_stats(stats.sum(axis=0), max_order, smooth)
