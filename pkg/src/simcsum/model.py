"""Shared-encoder, two-decoder transformer.

Both decoders read the same encoder output through ONE set of cross-attention
projections per layer (``cross.{i}.*``); everything else in a decoder stack,
and its vocabulary head, belongs to that decoder alone. The token embedding
table is shared by the encoder and both decoders.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .numerics import ContractError, ShapeError, Tensor

MASK_VALUE = -1e9


class TaskId(str, enum.Enum):
    SIM = "sim"
    SUM = "sum"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    ffn_dim: int = 256
    max_positions: int = 1024
    dropout_rate: float = 0.1
    seed: int = 0
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        dims = ("vocab_size", "d_model", "n_heads", "n_enc_layers", "n_dec_layers", "ffn_dim", "max_positions")
        for name in dims:
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ContractError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def _attn_shapes(prefix, d):
    out = {}
    for p in ("q", "k", "v", "o"):
        out[f"{prefix}.{p}.w"] = (d, d)
        out[f"{prefix}.{p}.b"] = (d,)
    return out


def _ffn_shapes(prefix, d, f):
    return {f"{prefix}.w1": (d, f), f"{prefix}.b1": (f,), f"{prefix}.w2": (f, d), f"{prefix}.b2": (d,)}


def _ln_shapes(prefix, d):
    return {f"{prefix}.g": (d,), f"{prefix}.b": (d,)}


def param_shapes(config: ModelConfig, tasks=(TaskId.SIM, TaskId.SUM)) -> dict:
    """Ordered ``name -> shape`` map for a model serving ``tasks``."""
    d, f, v = config.d_model, config.ffn_dim, config.vocab_size
    shapes = {"embed.tokens": (v, d)}
    for i in range(config.n_enc_layers):
        shapes.update(_attn_shapes(f"enc.{i}.self", d))
        shapes.update(_ln_shapes(f"enc.{i}.ln1", d))
        shapes.update(_ffn_shapes(f"enc.{i}.ffn", d, f))
        shapes.update(_ln_shapes(f"enc.{i}.ln2", d))
    for i in range(config.n_dec_layers):
        shapes.update(_attn_shapes(f"cross.{i}", d))
    for task in tasks:
        t = TaskId(task).value
        for i in range(config.n_dec_layers):
            shapes.update(_attn_shapes(f"dec.{t}.{i}.self", d))
            shapes.update(_ln_shapes(f"dec.{t}.{i}.ln1", d))
            shapes.update(_ln_shapes(f"dec.{t}.{i}.ln2", d))
            shapes.update(_ffn_shapes(f"dec.{t}.{i}.ffn", d, f))
            shapes.update(_ln_shapes(f"dec.{t}.{i}.ln3", d))
        shapes[f"head.{t}.w"] = (d, v)
        shapes[f"head.{t}.b"] = (v,)
    return shapes


def param_count(config: ModelConfig, n_tasks: int = 2) -> int:
    """Closed-form parameter count."""
    d, f, v = config.d_model, config.ffn_dim, config.vocab_size
    attn = 4 * (d * d + d)
    ffn = d * f + f + f * d + d
    ln = 2 * d
    enc_layer = attn + ffn + 2 * ln
    dec_layer = attn + ffn + 3 * ln
    head = d * v + v
    return (v * d
            + config.n_enc_layers * enc_layer
            + config.n_dec_layers * attn
            + n_tasks * (config.n_dec_layers * dec_layer + head))


def init_scale(shape) -> float:
    fan_in, fan_out = shape
    return math.sqrt(6.0 / (fan_in + fan_out))


class ModelParams:
    """Named parameter tensors plus the config and task set they serve."""

    def __init__(self, config: ModelConfig, tensors: dict, tasks=(TaskId.SIM, TaskId.SUM)):
        self.config = config
        self.tasks = tuple(TaskId(t) for t in tasks)
        expected = param_shapes(config, self.tasks)
        if list(tensors) != list(expected):
            missing = set(expected) - set(tensors)
            extra = set(tensors) - set(expected)
            raise ContractError(f"parameter set mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {tensors[name].shape}")
        self.tensors = tensors

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def names(self):
        return list(self.tensors)

    def count(self) -> int:
        return sum(int(t.data.size) for t in self.tensors.values())

    def arrays(self) -> dict:
        return {k: t.data for k, t in self.tensors.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: Tensor(t.data.copy(), requires_grad=True)
                                         for k, t in self.tensors.items()}, self.tasks)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {k: Tensor(t.data.astype(dtype), requires_grad=True)
                                         for k, t in self.tensors.items()}, self.tasks)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None


def _param_rng(seed: int, name: str):
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


def init_params(config: ModelConfig, tasks=(TaskId.SIM, TaskId.SUM), dtype=None) -> ModelParams:
    """Glorot-uniform matrices, zero biases, unit layer-norm gains.

    Each tensor draws from its own stream keyed by ``(seed, name)``, so a
    tensor's initial value does not depend on which other tensors exist.
    """
    dtype = dtype or nx.get_dtype()
    tensors = {}
    for name, shape in param_shapes(config, tasks).items():
        if len(shape) == 2:
            s = init_scale(shape)
            arr = _param_rng(config.seed, name).uniform(-s, s, size=shape)
        elif name.endswith(".g"):
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        tensors[name] = Tensor(arr.astype(dtype), requires_grad=True)
    return ModelParams(config, tensors, tasks)


_POS_CACHE: dict = {}


def sinusoidal_positions(n: int, d: int, dtype) -> np.ndarray:
    key = (n, d, np.dtype(dtype).str)
    table = _POS_CACHE.get(key)
    if table is None:
        pos = np.arange(n)[:, None]
        i = np.arange(d)[None, :]
        angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
        table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle)).astype(dtype)
        table.setflags(write=False)
        _POS_CACHE[key] = table
    return table


class Dropout:
    """Per-site dropout streams keyed by ``(seed, step, site)``.

    Keying by site keeps one decoder's draws from shifting another's.
    """

    def __init__(self, rate: float, seed: int, step: int):
        self.rate = rate
        self.seed = seed
        self.step = step

    def __call__(self, x: Tensor, site: str) -> Tensor:
        if self.rate <= 0.0:
            return x
        rng = np.random.default_rng([self.seed, self.step, zlib.crc32(site.encode("utf-8"))])
        return nx.dropout(x, self.rate, rng)


def _no_dropout(x, site):
    return x


def _linear(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    return x @ params[f"{prefix}.w"] + params[f"{prefix}.b"]


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, t, d = x.shape
    return nx.transpose(x.reshape(b, t, n_heads, d // n_heads), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, t, dk = x.shape
    return nx.transpose(x, (0, 2, 1, 3)).reshape(b, t, h * dk)


def project_kv(params: ModelParams, prefix: str, kv_in: Tensor, n_heads: int):
    """Key/value heads for ``kv_in``; reused across decoding steps for cross-attention."""
    k = _split_heads(_linear(kv_in, params, f"{prefix}.k"), n_heads)
    v = _split_heads(_linear(kv_in, params, f"{prefix}.v"), n_heads)
    return k, v


def multi_head_attention(q_in: Tensor, kv_in: Tensor, params: ModelParams, prefix: str, n_heads: int,
                         mask=None, kv=None) -> Tensor:
    """Scaled dot-product attention over ``n_heads`` heads, concatenated and projected.

    ``mask`` is boolean, true where attention is allowed, broadcastable to
    ``(batch, heads, q_len, kv_len)``. ``kv`` optionally supplies precomputed
    key/value heads from :func:`project_kv`.
    """
    b, tq, d = q_in.shape
    if d % n_heads:
        raise ContractError(f"d_model={d} is not divisible by n_heads={n_heads}")
    q = _split_heads(_linear(q_in, params, f"{prefix}.q"), n_heads)
    k, v = kv if kv is not None else project_kv(params, prefix, kv_in, n_heads)
    tk = k.shape[2]
    scores = (q @ nx.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(d // n_heads))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            np.broadcast_shapes(mask.shape, (b, n_heads, tq, tk))
        except ValueError:
            raise ShapeError(f"attention mask {mask.shape} does not fit scores {(b, n_heads, tq, tk)}") from None
        scores = nx.masked_fill(scores, ~mask, MASK_VALUE)
    attn = nx.softmax(scores, axis=-1)
    return _linear(_merge_heads(attn @ v), params, f"{prefix}.o")


def _ffn(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    hidden = nx.gelu(x @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"])
    return hidden @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"]


def _ln(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    return nx.layer_norm(x, params[f"{prefix}.g"], params[f"{prefix}.b"], params.config.layer_norm_eps)


def _embed(params: ModelParams, ids: np.ndarray) -> Tensor:
    cfg = params.config
    if ids.shape[1] > cfg.max_positions:
        raise ContractError(f"sequence length {ids.shape[1]} exceeds max_positions={cfg.max_positions}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise ContractError(f"token id out of range [0, {cfg.vocab_size})")
    tok = nx.embedding(params["embed.tokens"], ids)
    return tok + sinusoidal_positions(cfg.max_positions, cfg.d_model, tok.dtype)[: ids.shape[1]]


def encode_source(params: ModelParams, src_ids, src_mask, dropout=None) -> Tensor:
    """Shared encoder stack: ``(batch, src_len) -> (batch, src_len, d_model)``."""
    src_ids = np.asarray(src_ids, dtype=np.int64)
    src_mask = np.asarray(src_mask, dtype=bool)
    if src_mask.shape != src_ids.shape:
        raise ShapeError(f"source mask {src_mask.shape} does not match ids {src_ids.shape}")
    drop = dropout or _no_dropout
    cfg = params.config
    h = drop(_embed(params, src_ids), "enc.embed")
    key_mask = src_mask[:, None, None, :]
    for i in range(cfg.n_enc_layers):
        a = multi_head_attention(h, h, params, f"enc.{i}.self", cfg.n_heads, key_mask)
        h = _ln(h + drop(a, f"enc.{i}.self"), params, f"enc.{i}.ln1")
        h = _ln(h + drop(_ffn(h, params, f"enc.{i}.ffn"), f"enc.{i}.ffn"), params, f"enc.{i}.ln2")
    return h


def cross_memory(params: ModelParams, encoder_states: Tensor) -> list:
    """Per-layer cross-attention key/value heads over the encoder output."""
    cfg = params.config
    return [project_kv(params, f"cross.{i}", encoder_states, cfg.n_heads) for i in range(cfg.n_dec_layers)]


def decoder_forward(params: ModelParams, task, tgt_ids, encoder_states: Tensor, src_mask, tgt_mask=None,
                    dropout=None, memory=None) -> Tensor:
    """Run one task's decoder stack and head: ``-> (batch, tgt_len, vocab)`` logits."""
    task = TaskId(task)
    if task not in params.tasks:
        raise ContractError(f"model has no {task.value} decoder")
    tgt_ids = np.asarray(tgt_ids, dtype=np.int64)
    src_mask = np.asarray(src_mask, dtype=bool)
    b, t = tgt_ids.shape
    cfg = params.config
    if t > cfg.max_positions:
        raise ContractError(f"target length {t} exceeds max_positions={cfg.max_positions}")
    drop = dropout or _no_dropout
    causal = np.tril(np.ones((t, t), dtype=bool))[None, None]
    self_mask = causal if tgt_mask is None else causal & np.asarray(tgt_mask, dtype=bool)[:, None, None, :]
    cross_mask = src_mask[:, None, None, :]
    if memory is None:
        memory = cross_memory(params, encoder_states)
    name = task.value
    h = drop(_embed(params, tgt_ids), f"dec.{name}.embed")
    for i in range(cfg.n_dec_layers):
        p = f"dec.{name}.{i}"
        a = multi_head_attention(h, h, params, f"{p}.self", cfg.n_heads, self_mask)
        h = _ln(h + drop(a, f"{p}.self"), params, f"{p}.ln1")
        c = multi_head_attention(h, encoder_states, params, f"cross.{i}", cfg.n_heads, cross_mask, kv=memory[i])
        h = _ln(h + drop(c, f"{p}.cross"), params, f"{p}.ln2")
        h = _ln(h + drop(_ffn(h, params, f"{p}.ffn"), f"{p}.ffn"), params, f"{p}.ln3")
    return h @ params[f"head.{name}.w"] + params[f"head.{name}.b"]
