"""Byte pair encoding over whitespace-tokenized text.

Words are split into characters with an end-of-word marker on the last one.
Learning repeatedly merges the most frequent adjacent pair (ties broken by
the lexicographically smallest pair).  Segmented output marks word-internal
boundaries with a trailing ``@@`` so that ``detokenize`` can undo it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

EOW = "</w>"
CONT = "@@"


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + EOW,)


@dataclass
class BPEModel:
    merges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache: dict[str, tuple[str, ...]] = {}

    def segment_word(self, word: str) -> tuple[str, ...]:
        if word in self._cache:
            return self._cache[word]
        symbols = list(_word_symbols(word))
        while len(symbols) > 1:
            best = None
            for i in range(len(symbols) - 1):
                r = self._ranks.get((symbols[i], symbols[i + 1]))
                if r is not None and (best is None or r < best[0]):
                    best = (r, i)
            if best is None:
                break
            pair = (symbols[best[1]], symbols[best[1] + 1])
            merged: list[str] = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == pair:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        out = tuple(symbols)
        self._cache[word] = out
        return out

    def to_text(self) -> str:
        lines = [f"bpe-merges {len(self.merges)}"] + [f"{a} {b}" for a, b in self.merges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BPEModel":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("bpe-merges "):
            raise ValueError("missing 'bpe-merges <N>' header")
        n = int(lines[0].split()[1])
        merges = []
        for line in lines[1 : n + 1]:
            a, b = line.split(" ")
            merges.append((a, b))
        if len(merges) != n:
            raise ValueError(f"header declares {n} merges, found {len(merges)}")
        return cls(merges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BPEModel":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def train_bpe(corpus: Iterable[str], num_merges: int) -> BPEModel:
    """Learn ``num_merges`` merges from an iterable of sentences."""
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    word_freq = Counter(w for line in corpus for w in line.split())
    if not word_freq:
        raise ValueError("cannot learn BPE from an empty corpus")
    vocab = {_word_symbols(w): c for w, c in sorted(word_freq.items())}
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pairs: Counter = Counter()
        for symbols, c in vocab.items():
            for i in range(len(symbols) - 1):
                pairs[symbols[i], symbols[i + 1]] += c
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merges.append(best)
        new_vocab = {}
        for symbols, c in vocab.items():
            out = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    out.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            key = tuple(out)
            new_vocab[key] = new_vocab.get(key, 0) + c
        vocab = new_vocab
    return BPEModel(merges)


def apply_bpe(model: BPEModel, sentence: str) -> list[str]:
    tokens: list[str] = []
    for word in sentence.split():
        symbols = model.segment_word(word)
        for j, sym in enumerate(symbols):
            if j == len(symbols) - 1:
                tokens.append(sym[: -len(EOW)])
            else:
                tokens.append(sym + CONT)
    return tokens


def detokenize(tokens: Iterable[str]) -> str:
    words: list[str] = []
    current = ""
    for tok in tokens:
        if tok.endswith(CONT):
            current += tok[: -len(CONT)]
        else:
            words.append(current + tok)
            current = ""
    if current:
        words.append(current)
    return " ".join(words)
