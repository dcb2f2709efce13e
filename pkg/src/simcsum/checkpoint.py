"""Binary checkpoints.

Layout (little-endian)::

    b"SIMC" | u32 version | u32 n | n bytes UTF-8 JSON header
    then per tensor: u32 len | name | u8 dtype | u32 rank | u32 dims[rank] | raw data

The JSON header carries the model/train configs, optimizer scalars, loop
position, vocabulary fingerprint and the tensor count.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParams, TaskId
from .numerics import AdamState, Tensor
from .training import TrainConfig, TrainState

MAGIC = b"SIMC"
VERSION = 1

_DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("<i8"): 2}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


class CheckpointError(ValueError):
    """Unreadable or incompatible checkpoint."""


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class FingerprintError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model_config: ModelConfig
    tasks: tuple
    params: dict
    train_config: dict | None = None
    vocab_fingerprint: str | None = None
    optim_step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    batch_index: int = 0
    best_val: float | None = None
    best_params: dict | None = None
    bad_epochs: int = 0
    done: bool = False
    version: int = VERSION

    @classmethod
    def from_state(cls, state: TrainState, train_config: TrainConfig | None = None,
                   vocab_fingerprint: str | None = None) -> "Checkpoint":
        p = state.params
        return cls(
            model_config=p.config, tasks=tuple(t.value for t in p.tasks), params=dict(p.arrays()),
            train_config=train_config.to_dict() if train_config is not None else None,
            vocab_fingerprint=vocab_fingerprint, optim_step=state.optim.step, beta1=state.optim.beta1,
            beta2=state.optim.beta2, eps=state.optim.eps, adam_m=dict(state.optim.m), adam_v=dict(state.optim.v),
            step=state.step, epoch=state.epoch, batch_index=state.batch_index, best_val=state.best_val,
            best_params=state.best_params, bad_epochs=state.bad_epochs, done=state.done)

    def model_params(self, best: bool = False) -> ModelParams:
        src = self.best_params if best and self.best_params is not None else self.params
        tensors = {k: Tensor(v.copy(), requires_grad=True, dtype=v.dtype) for k, v in src.items()}
        return ModelParams(self.model_config, tensors, self.tasks)

    def to_state(self) -> TrainState:
        optim = AdamState(self.beta1, self.beta2, self.eps, self.optim_step,
                          {k: v.copy() for k, v in self.adam_m.items()},
                          {k: v.copy() for k, v in self.adam_v.items()})
        best = {k: v.copy() for k, v in self.best_params.items()} if self.best_params is not None else None
        return TrainState(self.model_params(), optim, self.step, self.epoch, self.batch_index,
                          self.best_val, best, self.bad_epochs, self.done)

    def train_config_obj(self) -> TrainConfig | None:
        return TrainConfig(**self.train_config) if self.train_config is not None else None


def _records(ckpt: Checkpoint):
    for k, v in ckpt.params.items():
        yield f"param/{k}", v
    for k, v in ckpt.adam_m.items():
        yield f"adam.m/{k}", v
    for k, v in ckpt.adam_v.items():
        yield f"adam.v/{k}", v
    if ckpt.best_params is not None:
        for k, v in ckpt.best_params.items():
            yield f"best/{k}", v


def to_bytes(ckpt: Checkpoint) -> bytes:
    records = list(_records(ckpt))
    header = {
        "format_version": VERSION,
        "model": ckpt.model_config.to_dict(),
        "tasks": list(ckpt.tasks),
        "train": ckpt.train_config,
        "vocab_fingerprint": ckpt.vocab_fingerprint,
        "optim": {"step": ckpt.optim_step, "beta1": ckpt.beta1, "beta2": ckpt.beta2, "eps": ckpt.eps},
        "loop": {"step": ckpt.step, "epoch": ckpt.epoch, "batch_index": ckpt.batch_index,
                 "best_val": ckpt.best_val, "bad_epochs": ckpt.bad_epochs, "done": ckpt.done,
                 "has_best": ckpt.best_params is not None},
        "n_tensors": len(records),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", VERSION, len(blob)))
    out.write(blob)
    for name, arr in records:
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<")
        if dt not in _DTYPE_TAGS:
            raise CheckpointFormatError(f"unsupported dtype {arr.dtype} for {name}")
        raw_name = name.encode("utf-8")
        out.write(struct.pack("<I", len(raw_name)))
        out.write(raw_name)
        out.write(struct.pack("<BI", _DTYPE_TAGS[dt], arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(f"truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def from_bytes(data: bytes, vocab_fingerprint: str | None = None) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointFormatError("bad magic header; not a checkpoint file")
    version, n = r.unpack("<II")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {VERSION}")
    try:
        header = json.loads(r.take(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"corrupt header: {exc}") from None
    stored_fp = header.get("vocab_fingerprint")
    if vocab_fingerprint is not None and stored_fp is not None and stored_fp != vocab_fingerprint:
        raise FingerprintError("checkpoint was trained with a different vocabulary")
    tensors = {}
    for _ in range(header["n_tensors"]):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        tag, rank = r.unpack("<BI")
        if tag not in _TAG_DTYPES:
            raise CheckpointFormatError(f"unknown dtype tag {tag} for {name}")
        dims = r.unpack(f"<{rank}I") if rank else ()
        dt = _TAG_DTYPES[tag]
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(r.take(count * dt.itemsize), dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
        tensors[name] = arr
    if r.pos != len(data):
        raise CheckpointFormatError(f"{len(data) - r.pos} trailing bytes after last tensor")

    def group(prefix):
        return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}

    loop, optim = header["loop"], header["optim"]
    return Checkpoint(
        model_config=ModelConfig(**header["model"]),
        tasks=tuple(TaskId(t).value for t in header["tasks"]),
        params=group("param/"),
        train_config=header["train"],
        vocab_fingerprint=stored_fp,
        optim_step=optim["step"], beta1=optim["beta1"], beta2=optim["beta2"], eps=optim["eps"],
        adam_m=group("adam.m/"), adam_v=group("adam.v/"),
        step=loop["step"], epoch=loop["epoch"], batch_index=loop["batch_index"], best_val=loop["best_val"],
        best_params=group("best/") if loop["has_best"] else None,
        bad_epochs=loop["bad_epochs"], done=loop["done"], version=version)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(ckpt))
    tmp.replace(path)


def load_checkpoint(path, vocab_fingerprint: str | None = None) -> Checkpoint:
    """Read a checkpoint; pass the current vocabulary's fingerprint to guard against mismatches."""
    return from_bytes(Path(path).read_bytes(), vocab_fingerprint)
