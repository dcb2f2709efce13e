"""Tokenization, vocabularies, instance triples and batching."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")
TAG_EN, TAG_DE, TAG_SIMP = "<en>", "<de>", "<simp>"
TAGS = (TAG_EN, TAG_DE, TAG_SIMP)

DEFAULT_MAX_SRC_LEN = 512

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)


class DataError(ValueError):
    """Malformed or insufficient input data."""


def tokenize(text: str) -> list[str]:
    """Lowercased word/punctuation tokens; every punctuation mark is its own token."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> str:
    return " ".join(tokenize(text))


class Vocab:
    """Token <-> id mapping with a fixed reserved block at ids 0..3.

    Language/task tags are stored after the corpus tokens, like ordinary
    entries, so they round-trip through the vocabulary file.
    """

    def __init__(self, tokens):
        self.itos = list(RESERVED)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            if tok in self.stoi:
                raise DataError(f"duplicate vocabulary entry {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)
        for tag in TAGS:
            if tag not in self.stoi:
                self.stoi[tag] = len(self.itos)
                self.itos.append(tag)

    def __len__(self):
        return len(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    @property
    def tag_ids(self) -> dict:
        return {t: self.stoi[t] for t in TAGS}

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if tuple(lines[:4]) != RESERVED:
            raise DataError(f"{path}: vocabulary file must start with the reserved header {RESERVED}")
        return cls(lines[4:])


def build_vocab(texts, min_freq: int = 1, max_size: int | None = None) -> Vocab:
    """Most frequent tokens first, ties broken lexicographically.

    ``texts`` is an iterable of raw strings (see :func:`corpus_texts` for
    reading them from dataset files).
    """
    counts = Counter()
    for text in texts:
        counts.update(tokenize(text))
    if not counts:
        raise DataError("cannot build a vocabulary from an empty corpus")
    ranked = sorted((t for t, c in counts.items() if c >= min_freq and t not in RESERVED and t not in TAGS),
                    key=lambda t: (-counts[t], t))
    if max_size is not None:
        ranked = ranked[:max_size]
    return Vocab(ranked)


def corpus_texts(paths):
    for path in paths:
        for rec in load_dataset(path):
            yield rec.source
            yield rec.simplified
            yield rec.summary


def encode(text: str, vocab: Vocab, tag: str, max_len: int | None = None) -> list[int]:
    """``[tag, tokens..., EOS]``; unknown tokens map to UNK."""
    if tag not in TAGS:
        raise DataError(f"{tag!r} is not a language/task tag")
    ids = [vocab.id(t) for t in tokenize(text)]
    if max_len is not None and len(ids) > max_len - 2:
        ids = ids[: max(max_len - 2, 0)]
    return [vocab.stoi[tag], *ids, EOS]


def decode(ids, vocab: Vocab) -> str:
    """Inverse of :func:`encode` up to normalization; tags and specials are dropped."""
    skip = {PAD, BOS, EOS, *vocab.tag_ids.values()}
    out = []
    for i in ids:
        i = int(i)
        if i == EOS:
            break
        if i not in skip:
            out.append(vocab.itos[i])
    return " ".join(out)


@dataclass(frozen=True)
class TextTriple:
    source: str
    simplified: str
    summary: str
    line: int


@dataclass(frozen=True)
class InstanceTriple:
    x: tuple
    y_sim: tuple
    y_sum: tuple


_FIELDS = ("source", "simplified", "summary")


def load_dataset(path) -> list[TextTriple]:
    """Read a line-delimited JSON dataset; blank lines are ignored."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: record is not an object")
            for name in _FIELDS:
                value = rec.get(name)
                if value is None:
                    raise DataError(f"{path}:{lineno}: missing field {name!r}")
                if not isinstance(value, str) or not value.strip():
                    raise DataError(f"{path}:{lineno}: field {name!r} must be a non-empty string")
            out.append(TextTriple(rec["source"], rec["simplified"], rec["summary"], lineno))
    return out


def encode_triples(records, vocab: Vocab, max_src_len: int = DEFAULT_MAX_SRC_LEN) -> list[InstanceTriple]:
    return [
        InstanceTriple(
            tuple(encode(r.source, vocab, TAG_EN, max_src_len)),
            tuple(encode(r.simplified, vocab, TAG_SIMP)),
            tuple(encode(r.summary, vocab, TAG_DE)),
        )
        for r in records
    ]


@dataclass(frozen=True)
class Splits:
    train: list
    valid: list
    test: list


def split_dataset(instances, seed: int) -> Splits:
    """Seeded shuffle, then 80/10/10 (validation and test get ``n // 10`` each)."""
    n = len(instances)
    if n < 10:
        raise DataError(f"need at least 10 instances for an 80/10/10 split, got {n}")
    order = np.random.default_rng([seed, 0x5EED]).permutation(n)
    k = n // 10
    pick = [instances[i] for i in order]
    return Splits(train=pick[2 * k:], valid=pick[:k], test=pick[k:2 * k])


@dataclass
class Batch:
    x: np.ndarray
    y_sim: np.ndarray
    y_sum: np.ndarray
    x_mask: np.ndarray
    y_sim_mask: np.ndarray
    y_sum_mask: np.ndarray
    lengths: np.ndarray  # (batch, 3): lengths of x, y_sim, y_sum

    def __len__(self):
        return self.x.shape[0]


def _pad(seqs) -> np.ndarray:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def collate(instances) -> Batch:
    x = _pad([i.x for i in instances])
    ys = _pad([i.y_sim for i in instances])
    yz = _pad([i.y_sum for i in instances])
    lengths = np.array([[len(i.x), len(i.y_sim), len(i.y_sum)] for i in instances], dtype=np.int64)
    return Batch(x, ys, yz, x != PAD, ys != PAD, yz != PAD, lengths)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch, 0xBA7C4]).permutation(n)


def batches_from(instances, batch_size: int, seed: int | None = None, epoch: int = 0) -> list[Batch]:
    """Chunk ``instances`` into padded batches, reshuffled per epoch when ``seed`` is given."""
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    idx = epoch_order(len(instances), seed, epoch) if seed is not None else np.arange(len(instances))
    items = [instances[i] for i in idx]
    return [collate(items[i:i + batch_size]) for i in range(0, len(items), batch_size)]


def make_batches(instances, batch_size: int, seed: int, split: str = "train", epoch: int = 0) -> list[Batch]:
    """Split ``instances`` 80/10/10 and batch the requested part.

    Training batches are reshuffled from ``(seed, epoch)``; validation and test
    keep split order.
    """
    parts = split_dataset(instances, seed)
    try:
        chosen = {"train": parts.train, "valid": parts.valid, "test": parts.test}[split]
    except KeyError:
        raise DataError(f"unknown split {split!r}") from None
    return batches_from(chosen, batch_size, seed if split == "train" else None, epoch)
