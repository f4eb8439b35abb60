from .beam import (
    BeamHypothesis,
    BeamResult,
    beam_search,
    beam_search_scorer,
    greedy_decode,
    model_scorer,
    token_losses,
)
from .bleu import BleuReport, bleu, bleu_from_stats, corpus_stats, sentence_stats
from .significance import SignificanceReport, bootstrap_significance

__all__ = [
    "BeamHypothesis",
    "BeamResult",
    "BleuReport",
    "SignificanceReport",
    "beam_search",
    "beam_search_scorer",
    "bleu",
    "bleu_from_stats",
    "bootstrap_significance",
    "corpus_stats",
    "greedy_decode",
    "model_scorer",
    "sentence_stats",
    "token_losses",
]
