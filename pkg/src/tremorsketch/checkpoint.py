"""Binary checkpoint format.

Layout (little-endian)::

    b"PDTC"  u16 version
    u32 fingerprint length, fingerprint UTF-8
    f64 best validation loss
    u32 epoch
    u32 tensor count
    per tensor: u16 name length, name UTF-8, u8 rank, u64 dims[rank],
                float32 payload

The fingerprint is the canonical JSON architecture description of the
model, so a checkpoint is enough to rebuild the network it came from.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ArchitectureMismatch, CorruptCheckpoint, InvalidConfig, IoFailure

MAGIC = b"PDTC"
VERSION = 1


@dataclass
class Checkpoint:
    params: dict
    fingerprint: str
    best_val_loss: float = math.inf
    epoch: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model, best_val_loss=math.inf, epoch=0) -> "Checkpoint":
        return cls(model.state_dict(), model.cfg.fingerprint(), best_val_loss, epoch)

    def load_into(self, model) -> None:
        if model.cfg.fingerprint() != self.fingerprint:
            raise ArchitectureMismatch("checkpoint architecture does not match the model config")
        try:
            model.load_state_dict(self.params)
        except InvalidConfig as exc:
            raise ArchitectureMismatch(str(exc)) from exc


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    fp = ckpt.fingerprint.encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(fp)), fp,
             struct.pack("<dII", float(ckpt.best_val_loss), int(ckpt.epoch), len(ckpt.params))]
    for name, arr in ckpt.params.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint(f"truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic; not a checkpoint file")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
    (fp_len,) = r.unpack("<I")
    try:
        fingerprint = r.take(fp_len).decode("utf-8")
        best, epoch, count = r.unpack("<dII")
        params = {}
        for _ in range(count):
            (name_len,) = r.unpack("<H")
            name = r.take(name_len).decode("utf-8")
            (rank,) = r.unpack("<B")
            dims = r.unpack(f"<{rank}Q")
            n = int(np.prod(dims, dtype=np.uint64)) if rank else 1
            arr = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
            params[name] = arr.astype(np.float32)
    except UnicodeDecodeError as exc:
        raise CorruptCheckpoint(f"invalid UTF-8 in checkpoint: {exc}") from exc
    if r.pos != len(data):
        raise CorruptCheckpoint("trailing bytes after last tensor")
    return Checkpoint(params, fingerprint, best, epoch)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(encode_checkpoint(ckpt))
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path, expected_fingerprint: str | None = None) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    ckpt = decode_checkpoint(data)
    if expected_fingerprint is not None and ckpt.fingerprint != expected_fingerprint:
        raise ArchitectureMismatch(f"{path} was saved from a different architecture")
    return ckpt


def load_backbone(model, path) -> None:
    """Copy backbone tensors (e.g. transferred weights) from a checkpoint."""
    ckpt = load_checkpoint(path)
    params = model.named_parameters()
    wanted = [k for k in params if k.startswith("backbone.")]
    for k in wanted:
        if k not in ckpt.params:
            raise ArchitectureMismatch(f"checkpoint lacks backbone tensor {k}")
        if ckpt.params[k].shape != params[k].shape:
            raise ArchitectureMismatch(f"{k}: shape {ckpt.params[k].shape} != {params[k].shape}")
        params[k].data = np.array(ckpt.params[k], dtype=model.dtype)
