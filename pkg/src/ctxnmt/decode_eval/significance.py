"""Paired bootstrap resampling over sentence-level BLEU statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bleu import Reference, bleu_from_stats, corpus_stats


@dataclass
class SignificanceReport:
    num_samples: int
    wins_a: int
    wins_b: int
    ties: int
    p_value: float
    bleu_a: float
    bleu_b: float

    @property
    def better(self) -> str:
        if self.bleu_a > self.bleu_b:
            return "A"
        if self.bleu_b > self.bleu_a:
            return "B"
        return "tie"

    def to_record(self) -> str:
        return (
            f"samples={self.num_samples} wins_a={self.wins_a} wins_b={self.wins_b} ties={self.ties} "
            f"p={self.p_value:.6f} bleu_a={self.bleu_a:.4f} bleu_b={self.bleu_b:.4f} better={self.better}"
        )


def bootstrap_significance(
    hyps_a: Sequence[str],
    hyps_b: Sequence[str],
    refs: Sequence[Reference],
    num_samples: int = 1000,
    seed: int = 0,
    max_order: int = 4,
    lowercase: bool = True,
) -> SignificanceReport:
    """Compare two systems on ``num_samples`` resampled test sets.

    The system with the higher full-corpus BLEU is "better";
    ``p_value = 1 - wins_of_better / num_samples``.  Equal full-corpus BLEU
    gives ``p_value = 1``.
    """
    if not (len(hyps_a) == len(hyps_b) == len(refs)):
        raise ValueError("system outputs and references must be aligned")
    sa = corpus_stats(hyps_a, refs, max_order, lowercase)
    sb = corpus_stats(hyps_b, refs, max_order, lowercase)
    full_a = bleu_from_stats(sa.sum(axis=0), max_order).score
    full_b = bleu_from_stats(sb.sum(axis=0), max_order).score
    rng = np.random.default_rng(seed)
    n = len(refs)
    wins_a = wins_b = ties = 0
    for _ in range(num_samples):
        idx = rng.integers(0, n, size=n)
        a = bleu_from_stats(sa[idx].sum(axis=0), max_order).score
        b = bleu_from_stats(sb[idx].sum(axis=0), max_order).score
        if a > b:
            wins_a += 1
        elif b > a:
            wins_b += 1
        else:
            ties += 1
    if full_a > full_b:
        p = 1.0 - wins_a / num_samples
    elif full_b > full_a:
        p = 1.0 - wins_b / num_samples
    else:
        p = 1.0
    return SignificanceReport(num_samples, wins_a, wins_b, ties, p, full_a, full_b)
