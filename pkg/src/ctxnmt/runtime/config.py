"""Run configuration as flat ``section.key = value`` lines.

Every key has a default, so an empty file is a valid configuration.  Unknown
sections or keys are rejected to catch typos.  ``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

from ..transformer.config import TransformerConfig
from ..training import TrainSettings


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    d_model: int = 512
    d_ff: int = 2048
    num_layers: int = 6
    num_heads: int = 8
    max_len: int = 128
    dropout: float = 0.1
    label_smoothing: float = 0.1
    pre_norm: bool = False
    tie_output: bool = True
    ln_eps: float = 1e-6


@dataclass(frozen=True)
class TrainingSection:
    budget_tokens: int = 4096
    warmup: int = 4000
    lr_factor: float = 1.0
    seed: int = 0
    max_steps: int = 1000
    eval_interval: int = 100
    patience: int = 5
    clip_norm: float = 0.0  # 0 disables clipping
    dropout: bool = True
    concat_context: bool = False


@dataclass(frozen=True)
class JointSection:
    mode: str = "pre+next"
    # negative: the mode's default (0.5/0.3 with both contexts, 0.5 with one)
    mu: float = -1.0
    lam: float = -1.0
    skip_absent: bool = False


@dataclass(frozen=True)
class PretrainSection:
    encoder_mode: str = "two_encoders"


@dataclass(frozen=True)
class FinetuneSection:
    fusion: str = "sum_mean_pooled"
    trainable_context_encoders: bool = True


@dataclass(frozen=True)
class DataSection:
    train_src: str = ""
    train_tgt: str = ""
    train_tsv: str = ""
    dev_src: str = ""
    dev_tgt: str = ""
    mono: str = ""
    src_merges: int = 32000
    tgt_merges: int = 32000
    joint_bpe: bool = False
    src_vocab_size: int = 0  # 0 keeps every token
    tgt_vocab_size: int = 0
    min_freq: int = 1
    max_len: int = 128


@dataclass(frozen=True)
class DecodeSection:
    beam: int = 4
    length_norm: float = 0.6
    max_len: int = 0  # 0 means the model's max_len


@dataclass(frozen=True)
class EvalSection:
    lowercase: bool = True
    bootstrap_samples: int = 1000
    bootstrap_seed: int = 0


# "lambda" is a keyword, so the file key maps onto ``lam``
_KEY_ALIASES = {("joint", "lambda"): "lam"}
_KEY_NAMES = {("joint", "lam"): "lambda"}
CHOICES = {
    ("joint", "mode"): ("pre", "next", "pre+next"),
    ("pretrain", "encoder_mode"): ("two_encoders", "shared_encoder"),
    ("finetune", "fusion"): ("sum_mean_pooled", "embeddings_only", "explicit_attention"),
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    joint: JointSection = field(default_factory=JointSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    finetune: FinetuneSection = field(default_factory=FinetuneSection)
    data: DataSection = field(default_factory=DataSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def keys(cls) -> list[tuple[str, str, object]]:
        """All ``(section, key, default)`` triples in file order."""
        out = []
        default = cls()
        for sec in fields(cls):
            section = getattr(default, sec.name)
            for f in fields(section):
                out.append((sec.name, _KEY_NAMES.get((sec.name, f.name), f.name), getattr(section, f.name)))
        return out

    def set(self, dotted: str, raw: str) -> "RunConfig":
        section, _, key = dotted.strip().partition(".")
        if not key or section not in {f.name for f in fields(self)}:
            raise ConfigError(f"unknown config section in {dotted!r}")
        sec = getattr(self, section)
        attr = _KEY_ALIASES.get((section, key), key)
        names = {f.name: f for f in fields(sec)}
        if attr not in names:
            raise ConfigError(f"unknown config key {dotted!r}")
        value = _coerce(raw.strip(), getattr(sec, attr), dotted)
        allowed = CHOICES.get((section, attr))
        if allowed and value not in allowed:
            raise ConfigError(f"{dotted} must be one of {', '.join(allowed)}, got {value!r}")
        return replace(self, **{section: replace(sec, **{attr: value})})

    def with_overrides(self, assignments: Iterable[str]) -> "RunConfig":
        cfg = self
        for a in assignments:
            key, eq, value = a.partition("=")
            if not eq:
                raise ConfigError(f"expected section.key=value, got {a!r}")
            cfg = cfg.set(key, value)
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"line {lineno}: expected 'section.key = value'")
            try:
                cfg = cfg.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = []
        for section, key, _ in self.keys():
            value = getattr(getattr(self, section), _KEY_ALIASES.get((section, key), key))
            lines.append(f"{section}.{key} = {_render(value)}")
        return "\n".join(lines) + "\n"

    def transformer_config(self, src_vocab: int, tgt_vocab: int) -> TransformerConfig:
        return TransformerConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab, **asdict(self.model))

    def train_settings(self, **overrides) -> TrainSettings:
        t = self.training
        settings = TrainSettings(
            max_steps=t.max_steps,
            budget_tokens=t.budget_tokens,
            warmup_steps=t.warmup,
            lr_factor=t.lr_factor,
            seed=t.seed,
            eval_interval=t.eval_interval,
            patience=t.patience,
            clip_norm=t.clip_norm or None,
            dropout=t.dropout and self.model.dropout > 0,
        )
        return replace(settings, **overrides)


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(raw: str, default, what: str):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {what} (expected {type(default).__name__})") from None
    return raw
