"""Binary checkpoint files.

Layout (all integers little-endian)::

    b"CTXNMTCK"  u32 version
    u32 n  <n bytes of canonical JSON metadata>
    u32 count, then per tensor:
        u32 name_len  name  u32 ndim  u64 dims[ndim]  f64 data[prod(dims)]
    32-byte SHA-256 of everything above

Tensors are written in insertion order, so saving a loaded checkpoint gives
the same bytes back.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CTXNMTCK"
VERSION = 1
_ADAM_M = "adam.m/"
_ADAM_V = "adam.v/"


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointIntegrityError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class VocabularyMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    kind: str
    model_config: dict
    params: dict[str, np.ndarray]
    step: int = 0
    vocab_hashes: dict[str, str] = field(default_factory=dict)
    variant: dict = field(default_factory=dict)
    run_config: str = ""
    optimizer: dict | None = None
    version: int = VERSION

    def metadata(self) -> dict:
        meta = {
            "kind": self.kind,
            "model_config": self.model_config,
            "step": self.step,
            "vocab_hashes": self.vocab_hashes,
            "variant": self.variant,
            "run_config": self.run_config,
        }
        if self.optimizer is not None:
            meta["optimizer"] = {k: v for k, v in self.optimizer.items() if k not in ("m", "v")}
        return meta


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f8")
    head = struct.pack("<I", len(raw)) + raw + struct.pack("<I", arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def to_bytes(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.metadata(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    tensors = list(ckpt.params.items())
    if ckpt.optimizer is not None:
        tensors += [(_ADAM_M + k, v) for k, v in ckpt.optimizer["m"].items()]
        tensors += [(_ADAM_V + k, v) for k, v in ckpt.optimizer["v"].items()]
    body = bytearray(MAGIC + struct.pack("<I", ckpt.version))
    body += struct.pack("<I", len(meta)) + meta
    body += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        body += _pack_tensor(name, arr)
    return bytes(body) + hashlib.sha256(body).digest()


def from_bytes(blob: bytes) -> Checkpoint:
    if len(blob) < len(MAGIC) + 4 + 32 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointIntegrityError("not a checkpoint file (bad magic or truncated)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointIntegrityError("checkpoint integrity hash mismatch (truncated or corrupt)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {VERSION}")
    (n,) = struct.unpack_from("<I", body, off)
    off += 4
    meta = json.loads(body[off : off + n].decode("utf-8"))
    off += n
    (count,) = struct.unpack_from("<I", body, off)
    off += 4
    params: dict[str, np.ndarray] = {}
    m: dict[str, np.ndarray] = {}
    v: dict[str, np.ndarray] = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<I", body, off)
        off += 4
        name = body[off : off + ln].decode("utf-8")
        off += ln
        (ndim,) = struct.unpack_from("<I", body, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", body, off)
        off += 8 * ndim
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=size, offset=off).astype(np.float64).reshape(shape)
        off += 8 * size
        if name.startswith(_ADAM_M):
            m[name[len(_ADAM_M):]] = arr
        elif name.startswith(_ADAM_V):
            v[name[len(_ADAM_V):]] = arr
        else:
            params[name] = arr
    if off != len(body):
        raise CheckpointIntegrityError("trailing bytes after tensor records")
    optimizer = None
    if "optimizer" in meta:
        optimizer = dict(meta["optimizer"], m=m, v=v)
    return Checkpoint(
        kind=meta["kind"],
        model_config=meta["model_config"],
        params=params,
        step=meta["step"],
        vocab_hashes=meta["vocab_hashes"],
        variant=meta["variant"],
        run_config=meta["run_config"],
        optimizer=optimizer,
        version=version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path, expected_vocab_hashes: dict[str, str] | None = None) -> Checkpoint:
    ckpt = from_bytes(Path(path).read_bytes())
    if expected_vocab_hashes:
        check_vocab(ckpt, expected_vocab_hashes)
    return ckpt


def check_vocab(ckpt: Checkpoint, expected: dict[str, str]) -> None:
    for side, digest in expected.items():
        have = ckpt.vocab_hashes.get(side)
        if have is not None and have != digest:
            raise VocabularyMismatchError(f"{side} vocabulary hash {have[:12]} != expected {digest[:12]}")


def apply_params(named: dict, params: dict[str, np.ndarray], mapping: dict[str, str] | None = None) -> list[str]:
    """Copy checkpoint arrays into live tensors; returns the names written.

    ``mapping`` renames checkpoint names to model names; without it names
    must match exactly.
    """
    written = []
    for src_name, arr in params.items():
        dst = mapping.get(src_name) if mapping is not None else src_name
        if dst is None or dst not in named:
            continue
        t = named[dst]
        if t.shape != arr.shape:
            raise CheckpointShapeError(f"{src_name} -> {dst}: shape {arr.shape} vs model {t.shape}")
        t.data[...] = arr
        written.append(dst)
    return written
