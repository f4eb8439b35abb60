from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .documents import AlignmentError, Document, ParallelDocument
from .vocab import CTX_NONE, SEP

log = logging.getLogger(__name__)

Ids = list[int]


@dataclass(frozen=True)
class TrainingInstance:
    """``(prev, cur, next, tgt)``; ``None`` marks an absent context or target."""

    cur_src: tuple[int, ...]
    prev_src: tuple[int, ...] | None = None
    next_src: tuple[int, ...] | None = None
    tgt: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.cur_src:
            raise ValueError("cur_src must be nonempty")

    @property
    def prev_or_none(self) -> tuple[int, ...]:
        return self.prev_src if self.prev_src is not None else (CTX_NONE,)

    @property
    def next_or_none(self) -> tuple[int, ...]:
        return self.next_src if self.next_src is not None else (CTX_NONE,)

    def size(self) -> int:
        """Token count over every sequence present."""
        return sum(len(s) for s in (self.cur_src, self.prev_src, self.next_src, self.tgt) if s is not None)


def truncate(ids: Sequence[int], max_len: int, what: str = "sentence") -> tuple[int, ...]:
    if len(ids) > max_len:
        log.warning("%s of length %d truncated to max_len=%d", what, len(ids), max_len)
        return tuple(ids[:max_len])
    return tuple(ids)


def extract_instances(
    doc: Document | ParallelDocument,
    encode_src: Callable[[str], Sequence[int]] | None = None,
    encode_tgt: Callable[[str], Sequence[int]] | None = None,
    max_len: int | None = None,
) -> list[TrainingInstance]:
    """One instance per sentence with its in-document neighbours.

    Sentences may already be id sequences, in which case the encoders are
    left as ``None``.
    """
    if isinstance(doc, ParallelDocument):
        if len(doc.source) != len(doc.target):
            raise AlignmentError(f"document {doc.doc_id!r} is misaligned")
        src_lines, tgt_lines = doc.source.sentences, doc.target.sentences
    else:
        src_lines, tgt_lines = doc.sentences, None

    def prep(line, enc):
        ids = enc(line) if enc is not None else line
        return truncate(ids, max_len) if max_len is not None else tuple(ids)

    src = [prep(s, encode_src) for s in src_lines]
    tgt = [prep(t, encode_tgt) for t in tgt_lines] if tgt_lines is not None else None
    out = []
    for i, cur in enumerate(src):
        out.append(
            TrainingInstance(
                cur_src=cur,
                prev_src=src[i - 1] if i > 0 else None,
                next_src=src[i + 1] if i + 1 < len(src) else None,
                tgt=tgt[i] if tgt is not None else None,
            )
        )
    return out


def concat_context(instance: TrainingInstance, sep: int = SEP) -> TrainingInstance:
    """Concatenation baseline: ``prev + [sep] + cur`` on the source side only."""
    if instance.prev_src is None:
        return instance
    return replace(
        instance,
        cur_src=tuple(instance.prev_src) + (sep,) + tuple(instance.cur_src),
        prev_src=None,
        next_src=None,
    )


def _ids_field(ids: Sequence[int] | None) -> str:
    return "-" if ids is None else " ".join(str(i) for i in ids)


def format_instances(instances: Sequence[TrainingInstance]) -> str:
    """One instance per line: ``prev<TAB>cur<TAB>next<TAB>tgt``; ``-`` marks ABSENT."""
    return "".join(
        "\t".join(_ids_field(s) for s in (i.prev_src, i.cur_src, i.next_src, i.tgt)) + "\n" for i in instances
    )


def parse_instances(text: str) -> list[TrainingInstance]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"instance line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        try:
            prev, cur, nxt, tgt = (None if p == "-" else tuple(int(x) for x in p.split()) for p in parts)
        except ValueError:
            raise ValueError(f"instance line {lineno}: non-integer token id") from None
        out.append(TrainingInstance(cur_src=cur, prev_src=prev, next_src=nxt, tgt=tgt))
    return out


def write_instances(instances: Sequence[TrainingInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_instances(instances))


def read_instances(path) -> list[TrainingInstance]:
    with open(path, encoding="utf-8") as fh:
        return parse_instances(fh.read())
