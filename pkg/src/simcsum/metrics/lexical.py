"""Lexical diversity: unigram Shannon entropy and MTLD."""

from __future__ import annotations

import math
from collections import Counter

from ..kernels import mtld_factor_count
from .readability import MetricError

MTLD_THRESHOLD = 0.72


def shannon_entropy(tokens) -> float:
    """Entropy in bits of the empirical unigram distribution."""
    counts = Counter(tokens)
    n = sum(counts.values())
    if n == 0:
        raise MetricError("entropy of an empty token list")
    # group types by count: a uniform distribution over 2^k types is then exactly k
    groups = Counter(counts.values())
    return math.fsum(m * (c / n) * math.log2(n / c) for c, m in groups.items())


def _mtld_pass(ids, n_types, threshold) -> float:
    factors = mtld_factor_count(ids, n_types, threshold)
    # no completed factor and no TTR drop: the whole pass counts as one factor
    return len(ids) / factors if factors > 0 else float(len(ids))


def mtld(tokens, ttr_threshold: float = MTLD_THRESHOLD) -> float:
    """Bidirectional MTLD: mean of the forward and reversed passes."""
    tokens = list(tokens)
    if not tokens:
        raise MetricError("MTLD of an empty token list")
    index = {}
    ids = [index.setdefault(t, len(index)) for t in tokens]
    fwd = _mtld_pass(ids, len(index), ttr_threshold)
    bwd = _mtld_pass(ids[::-1], len(index), ttr_threshold)
    return (fwd + bwd) / 2.0
