"""ROUGE-N and whole-text ROUGE-L over token lists."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..kernels import lcs_length


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float
    empty_input: bool = False  # reference or candidate had no n-grams; scores forced to 0


def _prf(overlap: int, n_cand: int, n_ref: int) -> RougeScore:
    if n_cand == 0 or n_ref == 0:
        return RougeScore(0.0, 0.0, 0.0, empty_input=True)
    p = overlap / n_cand
    r = overlap / n_ref
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f)


def ngrams(tokens, n: int) -> Counter:
    tokens = list(tokens)
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int = 1) -> RougeScore:
    """Clipped n-gram overlap, P over candidate n-grams and R over reference n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = ngrams(candidate, n)
    r = ngrams(reference, n)
    overlap = sum((c & r).values())
    return _prf(overlap, sum(c.values()), sum(r.values()))


def _as_ids(a, b):
    index = {}
    ia = [index.setdefault(t, len(index)) for t in a]
    ib = [index.setdefault(t, len(index)) for t in b]
    return ia, ib


def rouge_l(candidate, reference) -> RougeScore:
    """LCS over the full token sequences (no sentence splitting)."""
    a, b = _as_ids(list(candidate), list(reference))
    return _prf(lcs_length(a, b), len(a), len(b))
