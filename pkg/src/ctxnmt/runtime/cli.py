"""``ctxnmt`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(corpus, checkpoint, missing file), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import Sequence

from ..corpus import format_documents, read_documents
from ..corpus.documents import AlignmentError, CorpusError, Document, ParallelDocument
from ..decode_eval import bleu, bootstrap_significance
from ..jointmt import ConfigurationError
from ..numerics import NumericalError
from ..transformer.config import encoder_body_params
from .checkpoint import CheckpointError, load_checkpoint
from .config import CHOICES, ConfigError, RunConfig
from .models import closed_form_param_count
from .pipeline import (
    load_workdir,
    prepare,
    run_finetune,
    run_pretrain,
    train_baseline,
    train_joint,
    translate_documents,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("ctxnmt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _config_epilog() -> str:
    lines = ["configuration keys (set in --config files or with --set section.key=value):"]
    for section, key, default in RunConfig.keys():
        shown = "true" if default is True else "false" if default is False else repr(default)
        choice = CHOICES.get((section, "lam" if key == "lambda" else key))
        extra = f"  one of: {', '.join(choice)}" if choice else ""
        lines.append(f"  {section}.{key} = {shown}{extra}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run configuration file (section.key = value lines)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--workdir", default="work", help="prepared data directory (default: work)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(
        prog="ctxnmt",
        description="Document-context NMT: data preparation, training, translation and evaluation.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    sub.required = True

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                              epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("prepare", "parse documents, learn BPE, build vocabularies, write instance files")
    p.add_argument("--train-src")
    p.add_argument("--train-tgt")
    p.add_argument("--train-tsv", help="single tab-separated parallel file (src<TAB>tgt per line)")
    p.add_argument("--dev-src")
    p.add_argument("--dev-tgt")
    p.add_argument("--mono", help="monolingual source-side documents for pre-training")

    def trainer(name, help_text, default_out):
        p = add(name, help_text)
        p.add_argument("--out", default=None, help=f"checkpoint path (default: <workdir>/{default_out})")
        p.add_argument("--metrics", default=None, help="per-step metrics log (default: <out>.metrics)")
        return p

    trainer("train-baseline", "train the sentence-level baseline", "baseline.ckpt")
    p = trainer("pretrain", "pre-train context encoders on monolingual documents", "pretrain.ckpt")
    p.add_argument("--encoder-mode", choices=CHOICES[("pretrain", "encoder_mode")])
    p = trainer("train-joint", "joint translation + context prediction training", "joint.ckpt")
    p.add_argument("--mode", choices=CHOICES[("joint", "mode")])
    p.add_argument("--mu", type=float, help="weight of the previous-sentence loss")
    p.add_argument("--lambda", dest="lam", type=float, help="weight of the next-sentence loss")
    p.add_argument("--init-embeddings", metavar="CKPT", help="copy the source embedding table from a checkpoint")
    p.add_argument("--step2", action="store_true", help="continue on translation loss only after step 1")
    p.add_argument("--resume", metavar="CKPT", help="skip step 1 and start step 2 from this joint checkpoint")
    p = trainer("finetune", "fine-tune a translation model with context encoders", "finetune.ckpt")
    p.add_argument("--from", dest="pretrained", metavar="CKPT", help="pre-training checkpoint")
    p.add_argument("--fusion", choices=CHOICES[("finetune", "fusion")])
    p.add_argument("--no-pretrain", action="store_true", help="random context encoders (no checkpoint)")
    p.add_argument("--freeze-context", action="store_true", help="keep context encoders fixed")

    p = add("translate", "beam-search translation of a document file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="source documents")
    p.add_argument("--output", help="write translations here (default: stdout)")
    p.add_argument("--beam", type=int, help="beam size (default: decode.beam = 4)")
    p.add_argument("--max-len", type=int)

    p = add("evaluate", "corpus BLEU of hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True, action="append", help="reference file; repeat for several")
    p.add_argument("--smooth", action="store_true", help="add-one smoothing for orders > 1")

    p = add("significance", "paired bootstrap comparison of two systems")
    p.add_argument("--hyp-a", required=True)
    p.add_argument("--hyp-b", required=True)
    p.add_argument("--ref", required=True, action="append")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)

    p = add("param-count", "parameter counts per model kind and the accounting identities")
    p.add_argument("--src-vocab", type=int, default=None, help="default: prepared vocabulary or 32000")
    p.add_argument("--tgt-vocab", type=int, default=None)

    p = add("make-synthetic", "write a synthetic corpus (overfit or context task) to a directory")
    p.add_argument("--kind", choices=("overfit", "context"), default="overfit")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else None
    if cfg is None and args.command != "prepare" and (Path(args.workdir) / "config.txt").exists():
        cfg = RunConfig.load(Path(args.workdir) / "config.txt")
    return (cfg or RunConfig()).with_overrides(args.set)


def _flag_overrides(args) -> list[str]:
    out = []
    for flag, key in (
        ("train_src", "data.train_src"), ("train_tgt", "data.train_tgt"), ("train_tsv", "data.train_tsv"),
        ("dev_src", "data.dev_src"), ("dev_tgt", "data.dev_tgt"), ("mono", "data.mono"),
        ("encoder_mode", "pretrain.encoder_mode"), ("mode", "joint.mode"), ("mu", "joint.mu"),
        ("lam", "joint.lambda"), ("fusion", "finetune.fusion"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={value}")
    if getattr(args, "freeze_context", False):
        out.append("finetune.trainable_context_encoders=false")
    return out


@contextlib.contextmanager
def _metrics_file(args, out: Path):
    path = Path(args.metrics) if args.metrics else out.with_name(out.name + ".metrics")
    with open(path, "w", encoding="utf-8") as fh:
        yield fh


def _sentences(path: str) -> list[str]:
    return [s for doc in read_documents(path) for s in doc.sentences]


def _run(args, out_stream) -> int:
    cfg = _load_config(args).with_overrides(_flag_overrides(args))
    cmd = args.command
    if cmd == "prepare":
        prepare(cfg, args.workdir, out_stream)
        return EXIT_OK
    if cmd == "make-synthetic":
        _make_synthetic(args.kind, Path(args.out), args.seed)
        return EXIT_OK
    if cmd == "evaluate":
        refs = list(zip(*(_sentences(r) for r in args.ref)))
        report = bleu(_sentences(args.hyp), refs, lowercase=cfg.eval.lowercase, smooth=args.smooth)
        out_stream.write(report.to_record() + "\n")
        return EXIT_OK
    if cmd == "significance":
        refs = list(zip(*(_sentences(r) for r in args.ref)))
        rep = bootstrap_significance(
            _sentences(args.hyp_a), _sentences(args.hyp_b), refs,
            args.samples if args.samples is not None else cfg.eval.bootstrap_samples,
            args.seed if args.seed is not None else cfg.eval.bootstrap_seed,
            lowercase=cfg.eval.lowercase,
        )
        out_stream.write(rep.to_record() + "\n")
        return EXIT_OK
    if cmd == "param-count":
        _param_count(cfg, args, out_stream)
        return EXIT_OK

    wd = load_workdir(args.workdir, cfg)
    if cmd == "translate":
        ckpt = load_checkpoint(args.ckpt, wd.vocab_hashes)
        beam = args.beam if args.beam is not None else cfg.decode.beam
        max_len = args.max_len or cfg.decode.max_len or None
        docs = read_documents(args.input)
        hyps = translate_documents(wd, ckpt, docs, beam, max_len, cfg.decode.length_norm)
        text = format_documents([Document(d.doc_id, h) for d, h in zip(docs, hyps)], headers=False)
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            out_stream.write(text)
        return EXIT_OK

    out = Path(args.out) if args.out else Path(args.workdir) / {
        "train-baseline": "baseline.ckpt", "pretrain": "pretrain.ckpt", "train-joint": "joint.ckpt",
        "finetune": "finetune.ckpt",
    }[cmd]
    if cmd == "finetune" and not args.pretrained and not args.no_pretrain:
        raise UsageError("finetune needs --from <pretrain checkpoint> or --no-pretrain")
    if cmd == "finetune" and args.pretrained and args.no_pretrain:
        raise UsageError("--from and --no-pretrain are mutually exclusive")
    if cmd == "train-joint" and args.resume and not args.step2:
        raise UsageError("--resume only applies to --step2")
    with _metrics_file(args, out) as metrics:
        if cmd == "train-baseline":
            result = train_baseline(wd, out, metrics)
        elif cmd == "pretrain":
            result = run_pretrain(wd, out, metrics)
        elif cmd == "train-joint":
            result = train_joint(wd, out, metrics, args.init_embeddings, args.step2, args.resume)
        else:
            result = run_finetune(wd, out, metrics, args.pretrained, args.no_pretrain)
    best = f" best_dev={result.best_dev!r} best_step={result.best_step}" if result.best_dev is not None else ""
    out_stream.write(f"{cmd} steps={result.steps}{best} checkpoint={out}\n")
    return EXIT_OK


def _param_count(cfg: RunConfig, args, out_stream) -> None:
    src_v, tgt_v = args.src_vocab, args.tgt_vocab
    if src_v is None or tgt_v is None:
        try:
            wd = load_workdir(args.workdir, cfg)
            src_v = src_v or len(wd.src_vocab)
            tgt_v = tgt_v or len(wd.tgt_vocab)
        except CorpusError:
            src_v, tgt_v = src_v or 32000, tgt_v or 32000
    mcfg = cfg.transformer_config(src_v, tgt_v)
    fusion = {"fusion": cfg.finetune.fusion}
    counts = {
        "baseline": closed_form_param_count("baseline", mcfg),
        "joint": closed_form_param_count("joint", mcfg),
        "pretrain": closed_form_param_count("pretrain", mcfg, {"encoder_mode": cfg.pretrain.encoder_mode}),
        "finetune": closed_form_param_count("finetune", mcfg, fusion),
    }
    body = encoder_body_params(mcfg)
    w = out_stream.write
    w(f"config d_model={mcfg.d_model} d_ff={mcfg.d_ff} layers={mcfg.num_layers} src_vocab={src_v} tgt_vocab={tgt_v}\n")
    for kind, n in counts.items():
        w(f"{kind} {n}\n")
    w(f"encoder_body {body}\n")
    w(f"joint_nmt_subgraph {counts['baseline']} == baseline {counts['baseline']}\n")
    extra = counts["finetune"] - counts["baseline"]
    w(f"finetune - baseline = {extra} (2 x encoder_body = {2 * body})\n")


def _make_synthetic(kind: str, out: Path, seed: int) -> None:
    from ..synthetic import context_corpus, monolingual_context_corpus, overfit_corpus

    out.mkdir(parents=True, exist_ok=True)

    def write(name: str, docs: Sequence[ParallelDocument]) -> None:
        (out / f"{name}.src").write_text(format_documents([d.source for d in docs]), encoding="utf-8")
        (out / f"{name}.tgt").write_text(format_documents([d.target for d in docs]), encoding="utf-8")

    if kind == "overfit":
        docs = overfit_corpus(seed=seed)
        write("train", docs)
        # the task is memorisation, so dev is held-in
        write("dev", docs[:4])
    else:
        write("train", context_corpus(64, seed=seed, split="seen"))
        write("dev", context_corpus(64, seed=seed + 1000, split="unseen"))
        mono = monolingual_context_corpus(256, seed=seed + 2000)
        (out / "mono.src").write_text(format_documents(mono), encoding="utf-8")


def main(argv: Sequence[str] | None = None, out_stream=None) -> int:
    out_stream = out_stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args, out_stream)
    except (UsageError, ConfigError, ConfigurationError) as exc:
        print(f"ctxnmt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"ctxnmt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, AlignmentError, CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"ctxnmt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
