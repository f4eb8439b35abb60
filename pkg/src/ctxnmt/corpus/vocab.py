from __future__ import annotations

import hashlib
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

PAD, UNK, BOS, EOS, CTX_NONE, SEP = 0, 1, 2, 3, 4, 5
RESERVED = ("<pad>", "<unk>", "<s>", "</s>", "<ctx_none>", "<sep>")


class Vocabulary:
    """Token/id bijection with the reserved symbols at the lowest ids."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"vocabulary must start with the reserved tokens {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip_special and i < len(RESERVED) and i != UNK:
                continue
            out.append(self.itos[i])
        return out

    def unk_rate(self, sentences: Iterable[Sequence[str]]) -> float:
        total = unk = 0
        for sent in sentences:
            for t in sent:
                total += 1
                unk += t not in self.stoi
        return unk / total if total else 0.0

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()

    def to_text(self) -> str:
        return "\n".join(self.itos) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos


def build_vocab(
    corpus: Iterable[Sequence[str]], max_size: int | None = None, min_freq: int = 1
) -> Vocabulary:
    """Frequency-sorted vocabulary (ties lexicographic) after the reserved ids.

    ``max_size`` counts the reserved tokens.
    """
    counts = Counter(t for sent in corpus for t in sent)
    ranked = sorted((t for t, c in counts.items() if c >= min_freq and t not in RESERVED),
                    key=lambda t: (-counts[t], t))
    if max_size is not None:
        ranked = ranked[: max(0, max_size - len(RESERVED))]
    return Vocabulary(list(RESERVED) + ranked)
