from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instances import TrainingInstance
from .vocab import BOS, EOS, PAD


def batch_by_tokens(
    instances: Sequence[TrainingInstance], budget_tokens: int, seed: int = 0
) -> list[list[TrainingInstance]]:
    """Greedy packing of length-sorted instances under a token budget.

    Equal-size instances are ordered by a seeded shuffle, and the finished
    batches are shuffled with the same seed.
    """
    sizes = [inst.size() for inst in instances]
    for i, s in enumerate(sizes):
        if s > budget_tokens:
            raise ValueError(f"instance {i} has {s} tokens, more than the budget of {budget_tokens}")
    rng = np.random.default_rng(seed)
    jitter = rng.permutation(len(instances))
    order = sorted(range(len(instances)), key=lambda i: (sizes[i], jitter[i]))
    batches: list[list[TrainingInstance]] = []
    current: list[TrainingInstance] = []
    used = 0
    for i in order:
        if current and used + sizes[i] > budget_tokens:
            batches.append(current)
            current, used = [], 0
        current.append(instances[i])
        used += sizes[i]
    if current:
        batches.append(current)
    perm = rng.permutation(len(batches))
    return [batches[i] for i in perm]


def pad(seqs: Sequence[Sequence[int]], pad_id: int = PAD) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad_id, dtype=np.int64)
    valid = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        valid[i, : len(s)] = True
    return ids, valid


@dataclass
class Side:
    """Decoder-side arrays: ``BOS + seq`` as input, ``seq + EOS`` as target."""

    inputs: np.ndarray
    targets: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_seqs(cls, seqs: Sequence[Sequence[int]]) -> "Side":
        inputs, valid = pad([(BOS,) + tuple(s) for s in seqs])
        targets, _ = pad([tuple(s) + (EOS,) for s in seqs])
        return cls(inputs, targets, valid)


@dataclass
class Batch:
    src: np.ndarray
    src_valid: np.ndarray
    prev: np.ndarray
    prev_valid: np.ndarray
    next: np.ndarray
    next_valid: np.ndarray
    prev_absent: np.ndarray
    next_absent: np.ndarray
    tgt: Side | None
    prev_side: Side
    next_side: Side
    instances: list[TrainingInstance]

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @classmethod
    def from_instances(cls, instances: Sequence[TrainingInstance]) -> "Batch":
        if not instances:
            raise ValueError("empty batch")
        src, src_valid = pad([i.cur_src for i in instances])
        prevs = [i.prev_or_none for i in instances]
        nexts = [i.next_or_none for i in instances]
        prev, prev_valid = pad(prevs)
        nxt, next_valid = pad(nexts)
        tgt = None
        if all(i.tgt is not None for i in instances):
            tgt = Side.from_seqs([i.tgt for i in instances])
        return cls(
            src=src,
            src_valid=src_valid,
            prev=prev,
            prev_valid=prev_valid,
            next=nxt,
            next_valid=next_valid,
            prev_absent=np.array([i.prev_src is None for i in instances]),
            next_absent=np.array([i.next_src is None for i in instances]),
            tgt=tgt,
            prev_side=Side.from_seqs(prevs),
            next_side=Side.from_seqs(nexts),
            instances=list(instances),
        )
