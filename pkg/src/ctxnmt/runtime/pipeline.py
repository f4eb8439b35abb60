"""Pipeline stages over a working directory.

``prepare`` writes everything later stages read::

    config.txt            effective run configuration
    src.bpe  tgt.bpe      BPE merge files
    src.vocab tgt.vocab   vocabularies
    train.inst [dev.inst] [mono.inst]   encoded training instances
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence, TextIO

from ..corpus import (
    BPEModel,
    Document,
    ParallelDocument,
    TrainingInstance,
    Vocabulary,
    apply_bpe,
    build_vocab,
    concat_context,
    detokenize,
    extract_instances,
    pair_documents,
    parse_parallel_tsv,
    read_documents,
    read_instances,
    train_bpe,
    write_instances,
)
from ..corpus.documents import CorpusError
from ..ctxpretrain import FinetuneModel, PretrainModel, finetune, init_finetune_from_pretrained, pretrain
from ..decode_eval import beam_search
from ..jointmt import JointLossWeights, JointModel, train_joint_step1, train_joint_step2
from ..jointmt.training import init_joint_from_pretrained
from ..training import TrainResult, train
from ..transformer import NMTModel
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .models import from_checkpoint, to_checkpoint

log = logging.getLogger(__name__)


@dataclass
class Workdir:
    root: Path
    config: RunConfig
    src_bpe: BPEModel
    tgt_bpe: BPEModel
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    train: list[TrainingInstance]
    dev: list[TrainingInstance] | None
    mono: list[TrainingInstance] | None

    @property
    def vocab_hashes(self) -> dict[str, str]:
        return {"src": self.src_vocab.digest(), "tgt": self.tgt_vocab.digest()}

    def model_config(self):
        return self.config.transformer_config(len(self.src_vocab), len(self.tgt_vocab))

    def encode_src(self, sentence: str) -> list[int]:
        return self.src_vocab.encode(apply_bpe(self.src_bpe, sentence))

    def decode_tgt(self, ids: Sequence[int]) -> str:
        return detokenize(self.tgt_vocab.decode(ids))


def _parallel(cfg: RunConfig, prefix: str) -> list[ParallelDocument]:
    d = cfg.data
    if prefix == "train" and d.train_tsv:
        return parse_parallel_tsv(Path(d.train_tsv).read_bytes())
    src, tgt = getattr(d, f"{prefix}_src"), getattr(d, f"{prefix}_tgt")
    if not src and not tgt:
        return []
    if not (src and tgt):
        raise CorpusError(f"data.{prefix}_src and data.{prefix}_tgt must be given together")
    return pair_documents(read_documents(src), read_documents(tgt))


def prepare(cfg: RunConfig, root: str | Path, report: TextIO | None = None) -> Workdir:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    d = cfg.data
    train_docs = _parallel(cfg, "train")
    if not train_docs:
        raise CorpusError("no parallel training data: set data.train_src/data.train_tgt or data.train_tsv")
    dev_docs = _parallel(cfg, "dev")
    mono_docs: list[Document] = read_documents(d.mono) if d.mono else []

    src_lines = [s for doc in train_docs for s in doc.source.sentences]
    tgt_lines = [s for doc in train_docs for s in doc.target.sentences]
    mono_lines = [s for doc in mono_docs for s in doc.sentences]
    if d.joint_bpe:
        src_bpe = tgt_bpe = train_bpe(src_lines + mono_lines + tgt_lines, d.src_merges)
    else:
        src_bpe = train_bpe(src_lines + mono_lines, d.src_merges)
        tgt_bpe = train_bpe(tgt_lines, d.tgt_merges)
    src_vocab = build_vocab(
        (apply_bpe(src_bpe, s) for s in src_lines + mono_lines), d.src_vocab_size or None, d.min_freq
    )
    tgt_vocab = build_vocab((apply_bpe(tgt_bpe, s) for s in tgt_lines), d.tgt_vocab_size or None, d.min_freq)

    def enc_src(s):
        return src_vocab.encode(apply_bpe(src_bpe, s))

    def enc_tgt(s):
        return tgt_vocab.encode(apply_bpe(tgt_bpe, s))

    def instances(docs):
        out = []
        for doc in docs:
            is_parallel = isinstance(doc, ParallelDocument)
            out += extract_instances(doc, enc_src, enc_tgt if is_parallel else None, d.max_len)
        return out

    wd = Workdir(root, cfg, src_bpe, tgt_bpe, src_vocab, tgt_vocab, instances(train_docs),
                 instances(dev_docs) or None, instances(mono_docs) or None)
    (root / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    src_bpe.save(root / "src.bpe")
    tgt_bpe.save(root / "tgt.bpe")
    src_vocab.save(root / "src.vocab")
    tgt_vocab.save(root / "tgt.vocab")
    write_instances(wd.train, root / "train.inst")
    for name in ("dev", "mono"):
        path = root / f"{name}.inst"
        if getattr(wd, name):
            write_instances(getattr(wd, name), path)
        elif path.exists():
            path.unlink()
    if report is not None:
        report.write(
            f"documents train={len(train_docs)} dev={len(dev_docs)} mono={len(mono_docs)}\n"
            f"instances train={len(wd.train)} dev={len(wd.dev or [])} mono={len(wd.mono or [])}\n"
            f"vocab src={len(src_vocab)} tgt={len(tgt_vocab)} merges src={len(src_bpe.merges)} "
            f"tgt={len(tgt_bpe.merges)}\n"
            f"unk_rate src={src_vocab.unk_rate(apply_bpe(src_bpe, s) for s in src_lines):.6f} "
            f"tgt={tgt_vocab.unk_rate(apply_bpe(tgt_bpe, s) for s in tgt_lines):.6f}\n"
        )
    return wd


def load_workdir(root: str | Path, cfg: RunConfig | None = None) -> Workdir:
    """Read a prepared directory; ``cfg`` overrides its stored configuration."""
    root = Path(root)
    if not (root / "train.inst").exists():
        raise CorpusError(f"{root} is not a prepared directory (run 'prepare' first)")
    if cfg is None:
        cfg = RunConfig.load(root / "config.txt")

    def opt(name):
        path = root / f"{name}.inst"
        return read_instances(path) if path.exists() else None

    return Workdir(
        root, cfg, BPEModel.load(root / "src.bpe"), BPEModel.load(root / "tgt.bpe"),
        Vocabulary.load(root / "src.vocab"), Vocabulary.load(root / "tgt.vocab"),
        read_instances(root / "train.inst"), opt("dev"), opt("mono"),
    )


def _save(model, result: TrainResult, wd: Workdir, out: Path) -> Checkpoint:
    ckpt = to_checkpoint(model, result.steps, wd.vocab_hashes, result.optimizer, wd.config.to_text())
    save_checkpoint(ckpt, out)
    return ckpt


def _concat_one(inst: TrainingInstance, max_len: int) -> TrainingInstance:
    """Concatenate context; overlong results lose their oldest context tokens."""
    out = concat_context(inst)
    if len(out.cur_src) > max_len:
        log.warning("concatenated source of length %d cut to %d", len(out.cur_src), max_len)
        out = replace(out, cur_src=out.cur_src[-max_len:])
    return out


def _concat(insts, max_len: int):
    return [_concat_one(i, max_len) for i in insts] if insts else insts


def train_baseline(wd: Workdir, out: Path, metrics: TextIO) -> TrainResult:
    cfg = wd.config
    model = NMTModel(wd.model_config(), cfg.training.seed)
    train_set, dev = wd.train, wd.dev
    if cfg.training.concat_context:
        n = cfg.model.max_len
        train_set, dev = _concat(train_set, n), _concat(dev, n)
    result = train(model, lambda b, rng: model.loss(b, rng), train_set, cfg.train_settings(metric="tgt"), dev,
                   metrics_out=metrics)
    _save(model, result, wd, out)
    return result


def run_pretrain(wd: Workdir, out: Path, metrics: TextIO) -> TrainResult:
    cfg = wd.config
    triples = wd.mono
    if triples is None:
        log.warning("no monolingual corpus prepared; pre-training on the source side of the parallel data")
        triples = wd.train
    model = PretrainModel(wd.model_config(), cfg.training.seed, cfg.pretrain.encoder_mode)
    ckpt, result = pretrain(model, triples, cfg.train_settings(), dev=None, metrics_out=metrics,
                            vocab_hashes=wd.vocab_hashes)
    ckpt.run_config = cfg.to_text()
    save_checkpoint(ckpt, out)
    return result


def joint_weights(cfg: RunConfig) -> JointLossWeights:
    """Configured weights; a negative value selects the mode's default."""
    default = JointLossWeights.for_mode(cfg.joint.mode)
    mu = cfg.joint.mu if cfg.joint.mu >= 0 else default.mu
    lam = cfg.joint.lam if cfg.joint.lam >= 0 else default.lam
    return JointLossWeights(mu, lam)


def train_joint(
    wd: Workdir,
    out: Path,
    metrics: TextIO,
    init_embeddings: str | None = None,
    step2: bool = False,
    resume: str | None = None,
) -> TrainResult:
    """Step 1 (joint loss) unless ``resume`` names a step-1 checkpoint; then optionally step 2.

    With ``step2`` the step-1 model and metrics go to ``<out>.step1`` and
    ``<out>.step1.metrics``; the translation-only continuation to ``out``.
    """
    cfg = wd.config
    mode = cfg.joint.mode
    decoders = {"pre": ("pre",), "next": ("next",), "pre+next": ("pre", "next")}[mode]
    if resume:
        model = from_checkpoint(load_checkpoint(resume, wd.vocab_hashes))
        if not isinstance(model, JointModel):
            raise CorpusError(f"{resume} is not a joint checkpoint")
        result = None
    else:
        model = JointModel(wd.model_config(), cfg.training.seed, decoders)
        if init_embeddings:
            init_joint_from_pretrained(model, load_checkpoint(init_embeddings, {"src": wd.src_vocab.digest()}))
        step1_path = out.with_name(out.name + ".step1") if step2 else out
        with contextlib.ExitStack() as stack:
            log1 = metrics
            if step2:
                log1 = stack.enter_context(open(step1_path.with_name(step1_path.name + ".metrics"), "w"))
            result = train_joint_step1(model, wd.train, joint_weights(cfg), cfg.train_settings(), mode, wd.dev,
                                       log1, cfg.joint.skip_absent)
        _save(model, result, wd, step1_path)
    if step2:
        nmt, result = train_joint_step2(model, wd.train, cfg.train_settings(), wd.dev, metrics)
        _save(nmt, result, wd, out)
    return result


def run_finetune(
    wd: Workdir,
    out: Path,
    metrics: TextIO,
    pretrained: str | None,
    no_pretrain: bool = False,
) -> TrainResult:
    cfg = wd.config
    model = FinetuneModel(
        wd.model_config(), cfg.training.seed, cfg.finetune.fusion, cfg.finetune.trainable_context_encoders,
        no_pretrain,
    )
    if pretrained:
        init_finetune_from_pretrained(model, load_checkpoint(pretrained, {"src": wd.src_vocab.digest()}), pretrained)
    result = finetune(model, wd.train, cfg.train_settings(), wd.dev, metrics)
    _save(model, result, wd, out)
    return result


def translate_documents(
    wd: Workdir, ckpt: Checkpoint, docs: Sequence[Document], beam: int, max_len: int | None, length_norm: float
) -> list[list[str]]:
    model = from_checkpoint(ckpt)
    if isinstance(model, PretrainModel):
        raise CorpusError("a pre-training checkpoint cannot translate; fine-tune it first")
    concat = model.kind == "baseline" and wd.config.training.concat_context
    out = []
    for doc in docs:
        lines = []
        for inst in extract_instances(doc, wd.encode_src, None, wd.config.data.max_len):
            if concat:
                inst = _concat_one(inst, model.cfg.max_len)
            res = beam_search(model, inst, beam, max_len, length_norm)
            lines.append(wd.decode_tgt(res.tokens))
        out.append(lines)
    return out
