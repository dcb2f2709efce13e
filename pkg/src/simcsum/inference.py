"""Beam search (with tri-gram blocking) and greedy decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .kernels import trigram_ban_mask
from .model import ModelParams, TaskId, cross_memory, decoder_forward, encode_source
from .numerics import ContractError, Tensor
from .text_data import BOS, EOS, PAD


@dataclass(frozen=True)
class GenConfig:
    beam_size: int = 5
    max_len: int = 64
    trigram_block: bool = True
    length_norm_alpha: float = 1.0
    greedy_floor: bool = True

    def __post_init__(self):
        if self.beam_size < 1:
            raise ContractError("beam_size must be >= 1")
        if self.max_len < 3:
            raise ContractError("max_len must be >= 3")


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple  # tokens[0] is the target tag
    logp: float = 0.0
    finished: bool = False

    @property
    def generated(self) -> tuple:
        return self.tokens[1:]

    def score(self, alpha: float = 1.0) -> float:
        n = len(self.tokens) - 1
        return self.logp / (n ** alpha) if n else self.logp

    def output(self) -> list:
        """Generated tokens without the tag and trailing EOS."""
        out = list(self.tokens[1:])
        if out and out[-1] == EOS:
            out.pop()
        return out


def blocks_trigram(prefix, candidate: int) -> bool:
    """True iff appending ``candidate`` to ``prefix`` repeats a trigram already in ``prefix``."""
    prefix = list(prefix)
    if len(prefix) < 3:
        return False
    x, y = prefix[-2], prefix[-1]
    return any(prefix[i] == x and prefix[i + 1] == y and prefix[i + 2] == candidate
               for i in range(len(prefix) - 2))


def _ban_rows(hyps, vocab_size: int) -> np.ndarray:
    gens = [h.generated for h in hyps]
    if len({len(g) for g in gens}) == 1:
        return trigram_ban_mask(np.array(gens, dtype=np.int64).reshape(len(gens), -1), vocab_size)
    return np.vstack([trigram_ban_mask(np.array([g], dtype=np.int64).reshape(1, -1), vocab_size) for g in gens])


def beam_step(hypotheses, log_probs, beam_size: int, trigram_block: bool = True) -> list:
    """Expand live hypotheses by every token and keep the best ``beam_size``.

    ``log_probs`` is ``(len(hypotheses), vocab)``; entries at ``-inf`` are
    never selected. Blocked tri-gram continuations are set to ``-inf``. Ties in
    cumulative log-prob go to the lower token id, then the shorter hypothesis,
    then the earlier hypothesis.
    """
    hyps = list(hypotheses)
    if not hyps:
        return []
    lp = np.array(log_probs, dtype=np.float64, copy=True)
    if lp.shape[0] != len(hyps):
        raise ContractError(f"{len(hyps)} hypotheses but {lp.shape[0]} log-prob rows")
    vocab = lp.shape[1]
    if trigram_block:
        lp[_ban_rows(hyps, vocab)] = -np.inf
    total = np.array([h.logp for h in hyps])[:, None] + lp
    rows, cols = np.nonzero(np.isfinite(total))
    if rows.size == 0:
        return []
    scores = total[rows, cols]
    lengths = np.array([len(hyps[r].tokens) for r in rows])
    order = np.lexsort((rows, lengths, cols, -scores))[:beam_size]
    out = []
    for i in order:
        h = hyps[rows[i]]
        tok = int(cols[i])
        out.append(BeamHypothesis(h.tokens + (tok,), float(scores[i]), tok == EOS))
    return out


def _log_softmax(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.float64)
    m = x.max(axis=-1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=-1, keepdims=True))


class _Source:
    """Encoded source plus (optionally) cached cross-attention keys/values."""

    def __init__(self, params: ModelParams, src_ids, use_cache: bool):
        src = np.asarray(src_ids, dtype=np.int64).reshape(1, -1)
        if src.size == 0 or not (src != PAD).any():
            raise ContractError("cannot generate from an empty source")
        self.params = params
        self.ids = src
        self.mask = src != PAD
        self.enc = encode_source(params, src, self.mask)
        self.memory = cross_memory(params, self.enc) if use_cache else None

    def expand(self, k: int):
        enc = Tensor(np.repeat(self.enc.data, k, axis=0), dtype=self.enc.dtype)
        mask = np.repeat(self.mask, k, axis=0)
        memory = None
        if self.memory is not None:
            memory = [tuple(Tensor(np.repeat(t.data, k, axis=0), dtype=t.dtype) for t in kv) for kv in self.memory]
        return enc, mask, memory


def _next_log_probs(src: _Source, task: TaskId, prefixes, banned) -> np.ndarray:
    ids = np.array(prefixes, dtype=np.int64)
    enc, mask, memory = src.expand(ids.shape[0])
    logits = decoder_forward(src.params, task, ids, enc, mask, memory=memory)
    lp = _log_softmax(logits.data[:, -1, :])
    if banned:
        lp[:, list(banned)] = -np.inf
    return lp


def _default_banned(params: ModelParams, tag_id: int, extra=()) -> tuple:
    banned = {PAD, BOS, tag_id, *extra}
    return tuple(sorted(b for b in banned if 0 <= b < params.config.vocab_size))


def beam_search(params: ModelParams, src_ids, config: GenConfig, tag_id: int, task=TaskId.SUM,
                banned_ids=(), use_cache: bool = True) -> BeamHypothesis:
    """Best finished hypothesis by length-normalized score (best live one if none finish)."""
    task = TaskId(task)
    banned = _default_banned(params, tag_id, banned_ids)
    alpha = config.length_norm_alpha
    with nx.no_grad():
        src = _Source(params, src_ids, use_cache)
        live = [BeamHypothesis((tag_id,))]
        finished = []
        for _ in range(config.max_len):
            lp = _next_log_probs(src, task, [h.tokens for h in live], banned)
            cands = beam_step(live, lp, config.beam_size, config.trigram_block)
            if not cands:  # every continuation blocked: stop with what is live
                break
            live = [c for c in cands if not c.finished]
            finished.extend(c for c in cands if c.finished)
            if len(finished) >= config.beam_size or not live:
                break
        pool = finished or live
        best = min(pool, key=lambda h: (-h.score(alpha), len(h.tokens), h.tokens))
        if config.greedy_floor and config.beam_size > 1:
            g = greedy_decode(params, src_ids, config.max_len, tag_id, task, config.trigram_block, banned_ids,
                              _source=src)
            if g.finished >= best.finished and g.score(alpha) > best.score(alpha):
                best = g
    return best


def greedy_decode(params: ModelParams, src_ids, max_len: int, tag_id: int, task=TaskId.SUM,
                  trigram_block: bool = True, banned_ids=(), _source=None) -> BeamHypothesis:
    """Arg-max decoding; ties go to the lowest token id."""
    task = TaskId(task)
    banned = _default_banned(params, tag_id, banned_ids)
    with nx.no_grad():
        src = _source or _Source(params, src_ids, use_cache=True)
        tokens = [tag_id]
        logp = 0.0
        for _ in range(max_len):
            lp = _next_log_probs(src, task, [tokens], banned)[0]
            if trigram_block:
                for v in range(lp.shape[0]):
                    if np.isfinite(lp[v]) and blocks_trigram(tokens[1:], v):
                        lp[v] = -np.inf
            tok = int(np.argmax(lp))
            if not np.isfinite(lp[tok]):
                break
            logp += float(lp[tok])
            tokens.append(tok)
            if tok == EOS:
                return BeamHypothesis(tuple(tokens), logp, True)
    return BeamHypothesis(tuple(tokens), logp, False)


def generate(params: ModelParams, src_ids, config: GenConfig, tag_id: int, task=TaskId.SUM,
             banned_ids=(), use_cache: bool = True) -> list:
    """Token ids produced by the chosen decoder (summarization by default), tag and EOS stripped."""
    return beam_search(params, src_ids, config, tag_id, task, banned_ids, use_cache).output()


def has_repeated_trigram(tokens) -> bool:
    tokens = list(tokens)
    seen = set()
    for i in range(len(tokens) - 2):
        tri = tuple(tokens[i:i + 3])
        if tri in seen:
            return True
        seen.add(tri)
    return False
