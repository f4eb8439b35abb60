"""Beam search and batched greedy decoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..corpus.batching import Batch
from ..corpus.instances import TrainingInstance
from ..corpus.vocab import BOS, EOS
from ..numerics import Tensor, ops

log = logging.getLogger(__name__)

# prefixes (each starting with BOS) -> [n, vocab] next-token log-probabilities
Scorer = Callable[[Sequence[Sequence[int]]], np.ndarray]


@dataclass
class BeamHypothesis:
    tokens: tuple[int, ...]
    log_prob: float
    finished: bool = False

    def normalized(self, alpha: float) -> float:
        if alpha == 0.0:
            return self.log_prob
        return self.log_prob / max(len(self.tokens), 1) ** alpha


@dataclass
class BeamResult:
    tokens: list[int]
    log_prob: float
    score: float
    finished: bool

    @property
    def warning(self) -> bool:
        """True when no hypothesis reached EOS within ``max_len``."""
        return not self.finished


def _log_softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def translation_decoder(model):
    for name in ("tgt_decoder", "decoder"):
        dec = getattr(model, name, None)
        if dec is not None:
            return dec
    raise TypeError(f"{type(model).__name__} has no translation decoder")


def model_scorer(model, instance: TrainingInstance) -> Scorer:
    """Encode ``instance`` once and score prefixes with the target decoder."""
    batch = Batch.from_instances([instance])
    memory, mvalid = model.encode_batch(batch)
    decoder = translation_decoder(model)

    def score(prefixes):
        ids = np.asarray(prefixes, dtype=np.int64)
        n = ids.shape[0]
        mem = Tensor(np.repeat(memory.data, n, axis=0))
        logits = decoder(ids, mem, np.repeat(mvalid, n, axis=0))
        return _log_softmax(logits.data[:, -1, :])

    return score


def beam_search_scorer(
    score: Scorer,
    beam_size: int = 4,
    max_len: int = 100,
    length_norm: float = 0.6,
    bos: int = BOS,
    eos: int = EOS,
) -> BeamResult:
    """Step-synchronous beam search.

    Each step keeps the ``beam_size`` best extensions (ties: lower parent
    rank, then lower token id).  Extensions ending in ``eos`` leave the beam.
    Search stops when the beam empties, ``beam_size`` hypotheses have
    finished, or ``max_len`` tokens were generated.  Finished hypotheses are
    ranked by ``log_prob / len**length_norm``.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    alive = [BeamHypothesis((), 0.0)]
    finished: list[BeamHypothesis] = []
    for _ in range(max_len):
        logp = score([(bos,) + h.tokens for h in alive])
        totals = np.array([h.log_prob for h in alive])[:, None] + logp
        flat = totals.reshape(-1)
        # stable sort on -score keeps (parent rank, token id) order among ties
        order = np.argsort(-flat, kind="stable")[:beam_size]
        vocab = logp.shape[1]
        nxt = []
        for k in order:
            parent, tok = divmod(int(k), vocab)
            hyp = BeamHypothesis(alive[parent].tokens + (tok,), float(flat[k]))
            if tok == eos:
                hyp.finished = True
                finished.append(hyp)
            else:
                nxt.append(hyp)
        alive = nxt
        if not alive or len(finished) >= beam_size:
            break
    if finished:
        best = max(finished, key=lambda h: h.normalized(length_norm))
        toks = list(best.tokens[:-1])
        return BeamResult(toks, best.log_prob, best.normalized(length_norm), True)
    best = max(alive, key=lambda h: h.normalized(length_norm))
    log.warning("no hypothesis finished within max_len=%d", max_len)
    return BeamResult(list(best.tokens), best.log_prob, best.normalized(length_norm), False)


def beam_search(
    model,
    instance: TrainingInstance,
    beam_size: int = 4,
    max_len: int | None = None,
    length_norm: float = 0.6,
) -> BeamResult:
    """Translate one instance; context-consuming models read its prev/next."""
    max_len = max_len if max_len is not None else model.cfg.max_len
    return beam_search_scorer(model_scorer(model, instance), beam_size, max_len, length_norm)


def greedy_decode(model, instances: Sequence[TrainingInstance], max_len: int | None = None) -> list[list[int]]:
    """Batched argmax decoding (lowest token id wins ties)."""
    max_len = max_len if max_len is not None else model.cfg.max_len
    batch = Batch.from_instances(instances)
    memory, mvalid = model.encode_batch(batch)
    decoder = translation_decoder(model)
    n = batch.size
    ids = np.full((n, 1), BOS, dtype=np.int64)
    done = np.zeros(n, bool)
    out: list[list[int]] = [[] for _ in range(n)]
    for _ in range(max_len):
        logits = decoder(ids, memory, mvalid).data[:, -1, :]
        tok = logits.argmax(axis=-1)
        for i in range(n):
            if not done[i]:
                if tok[i] == EOS:
                    done[i] = True
                else:
                    out[i].append(int(tok[i]))
        if done.all():
            break
        ids = np.concatenate([ids, tok[:, None]], axis=1)
    return out


def token_losses(model, instances: Sequence[TrainingInstance]) -> list[np.ndarray]:
    """Unsmoothed per-token NLL of each target under teacher forcing."""
    batch = Batch.from_instances(instances)
    memory, mvalid = model.encode_batch(batch)
    logits = translation_decoder(model)(batch.tgt.inputs, memory, mvalid, batch.tgt.valid)
    nll = ops.token_nll(logits.data, batch.tgt.targets)
    return [nll[i, : batch.tgt.valid[i].sum()] for i in range(batch.size)]
