"""Slow, obviously-correct reference implementations used only by the tests."""

import functools
import itertools


def lcs_memo(a, b):
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def clipped_overlap(cand, ref, n):
    """Multiset intersection size of n-grams, by explicit counting."""
    cg = [tuple(cand[i:i + n]) for i in range(len(cand) - n + 1)]
    rg = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
    return sum(min(cg.count(g), rg.count(g)) for g in set(cg)), len(cg), len(rg)


def prf(overlap, n_cand, n_ref):
    if n_cand == 0 or n_ref == 0:
        return 0.0, 0.0, 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return p, r, (2 * p * r / (p + r) if p + r > 0 else 0.0)


def midranks(values):
    order = sorted(values)
    return [(order.index(v) + 1 + len(order) - order[::-1].index(v)) / 2 for v in values]


def mann_whitney_exact_bruteforce(a, b):
    """Two-tailed p by enumerating every assignment of pooled midranks to the first sample."""
    ranks = midranks(list(a) + list(b))
    n1, n2 = len(a), len(b)
    center = n1 * n2 / 2
    observed = abs(sum(ranks[:n1]) - n1 * (n1 + 1) / 2 - center)
    hits = total = 0
    for idx in itertools.combinations(range(n1 + n2), n1):
        u = sum(ranks[i] for i in idx) - n1 * (n1 + 1) / 2
        total += 1
        hits += abs(u - center) >= observed - 1e-9
    return hits / total


def mtld_trace(tokens, threshold=0.72):
    """Literal factor-count trace of one direction: returns (full factors, partial factor)."""
    full = 0
    seen, count = set(), 0
    for t in tokens:
        seen.add(t)
        count += 1
        if len(seen) / count < threshold:
            full += 1
            seen, count = set(), 0
    partial = (1 - len(seen) / count) / (1 - threshold) if count else 0.0
    return full, partial


def mtld_oracle(tokens, threshold=0.72):
    def one(seq):
        full, partial = mtld_trace(seq, threshold)
        factors = full + partial
        return len(seq) / factors if factors > 0 else float(len(seq))

    return (one(list(tokens)) + one(list(tokens)[::-1])) / 2
