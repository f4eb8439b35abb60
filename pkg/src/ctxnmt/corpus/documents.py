"""Document corpus files.

Format: UTF-8, one sentence per line, documents separated by a blank line.
A document may start with a ``#doc id=<name>`` header.  Parallel data is
either two such files with identical layout, or one file whose lines are
``source<TAB>target``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

HEADER = "#doc id="


class CorpusError(ValueError):
    """Malformed corpus input."""


class AlignmentError(CorpusError):
    pass


@dataclass
class Document:
    doc_id: str
    sentences: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class ParallelDocument:
    source: Document
    target: Document

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise AlignmentError(
                f"document {self.source.doc_id!r}: {len(self.source)} source vs "
                f"{len(self.target)} target sentences"
            )

    @property
    def doc_id(self) -> str:
        return self.source.doc_id


def _decode(stream: str | bytes) -> str:
    if isinstance(stream, str):
        return stream
    try:
        return stream.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"invalid UTF-8 at byte offset {exc.start}") from exc


def parse_documents(stream: str | bytes) -> list[Document]:
    text = _decode(stream)
    docs: list[Document] = []
    block: list[str] = []
    header: str | None = None

    def flush():
        nonlocal block, header
        doc_id = header if header is not None else f"doc{len(docs) + len(dropped)}"
        if block:
            docs.append(Document(doc_id, block))
        elif header is not None:
            log.warning("dropping empty document %r", doc_id)
            dropped.append(doc_id)
        block, header = [], None

    dropped: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            if block or header is not None:
                flush()
            continue
        if stripped.startswith(HEADER) and not block and header is None:
            header = stripped[len(HEADER):].strip()
            continue
        block.append(stripped)
    if block or header is not None:
        flush()
    return docs


def read_documents(path: str | Path) -> list[Document]:
    return parse_documents(Path(path).read_bytes())


def format_documents(docs: Iterable[Document], headers: bool = True) -> str:
    parts = []
    for doc in docs:
        lines = ([f"{HEADER}{doc.doc_id}"] if headers else []) + list(doc.sentences)
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + ("\n" if parts else "")


def pair_documents(source: list[Document], target: list[Document]) -> list[ParallelDocument]:
    if len(source) != len(target):
        raise AlignmentError(f"{len(source)} source documents vs {len(target)} target documents")
    return [ParallelDocument(s, t) for s, t in zip(source, target)]


def parse_parallel_tsv(stream: str | bytes) -> list[ParallelDocument]:
    out = []
    for doc in parse_documents(stream):
        src, tgt = [], []
        for i, line in enumerate(doc.sentences):
            if line.count("\t") != 1:
                raise AlignmentError(f"document {doc.doc_id!r} line {i}: expected exactly one tab")
            s, t = line.split("\t")
            src.append(s.strip())
            tgt.append(t.strip())
        out.append(ParallelDocument(Document(doc.doc_id, src), Document(doc.doc_id, tgt)))
    return out
