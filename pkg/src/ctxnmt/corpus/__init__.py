from .batching import Batch, Side, batch_by_tokens, pad
from .bpe import BPEModel, apply_bpe, detokenize, train_bpe
from .documents import (
    AlignmentError,
    CorpusError,
    Document,
    ParallelDocument,
    format_documents,
    pair_documents,
    parse_documents,
    parse_parallel_tsv,
    read_documents,
)
from .instances import (
    TrainingInstance,
    concat_context,
    extract_instances,
    format_instances,
    parse_instances,
    read_instances,
    truncate,
    write_instances,
)
from .vocab import BOS, CTX_NONE, EOS, PAD, RESERVED, SEP, UNK, Vocabulary, build_vocab

__all__ = [
    "AlignmentError",
    "BOS",
    "BPEModel",
    "Batch",
    "CTX_NONE",
    "CorpusError",
    "Document",
    "EOS",
    "PAD",
    "ParallelDocument",
    "RESERVED",
    "SEP",
    "Side",
    "TrainingInstance",
    "UNK",
    "Vocabulary",
    "apply_bpe",
    "batch_by_tokens",
    "build_vocab",
    "concat_context",
    "detokenize",
    "extract_instances",
    "format_documents",
    "format_instances",
    "pad",
    "pair_documents",
    "parse_documents",
    "parse_instances",
    "parse_parallel_tsv",
    "read_documents",
    "read_instances",
    "train_bpe",
    "truncate",
    "write_instances",
]
