"""Hot inner loops.

Every kernel exists twice: a scalar loop compiled by numba (``*_loop``) and a
numpy formulation (``*_numpy``). The public name binds to the compiled loop
unless numba is unavailable or disabled via ``SIMCSUM_DISABLE_NUMBA``; both
paths must return identical results and ``tests/test_kernels.py`` checks that.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, njit

__all__ = [
    "NUMBA_ENABLED",
    "lcs_length",
    "mtld_factor_count",
    "trigram_ban_mask",
    "subset_sum_counts",
]


# ---------------------------------------------------------------------------
# Longest common subsequence length (ROUGE-L)
# ---------------------------------------------------------------------------


def _lcs_length_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                cur[j + 1] = prev[j] + 1
            elif prev[j + 1] >= cur[j]:
                cur[j + 1] = prev[j + 1]
            else:
                cur[j + 1] = cur[j]
        for j in range(m + 1):
            prev[j] = cur[j]
    return int(prev[m])


def _lcs_length_numpy(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for tok in a:
        diag = np.where(b == tok, prev[:-1] + 1, 0)
        cand = np.maximum(prev[1:], diag)
        row = np.empty_like(prev)
        row[0] = 0
        # L[i][j] = max(L[i-1][j], L[i][j-1], match + L[i-1][j-1]) is a running max
        row[1:] = np.maximum.accumulate(cand)
        prev = row
    return int(prev[-1])


# ---------------------------------------------------------------------------
# MTLD single-direction factor count
# ---------------------------------------------------------------------------


def _mtld_factor_count_loop(ids, n_types, threshold):
    stamp = np.full(n_types, -1, dtype=np.int64)
    factors = 0.0
    segment = 0
    types = 0
    count = 0
    for k in range(ids.shape[0]):
        t = ids[k]
        count += 1
        if stamp[t] != segment:
            stamp[t] = segment
            types += 1
        if types / count < threshold:
            factors += 1.0
            segment += 1
            types = 0
            count = 0
    if count > 0:
        factors += (1.0 - types / count) / (1.0 - threshold)
    return factors


def _mtld_factor_count_numpy(ids, n_types, threshold):
    # Sequential by nature; this is the interpreter path behind the same contract.
    ids = np.asarray(ids, dtype=np.int64)
    stamp = np.full(n_types, -1, dtype=np.int64)
    factors = 0.0
    segment = types = count = 0
    for t in ids.tolist():
        count += 1
        if stamp[t] != segment:
            stamp[t] = segment
            types += 1
        if types / count < threshold:
            factors += 1.0
            segment += 1
            types = count = 0
    if count:
        factors += (1.0 - types / count) / (1.0 - threshold)
    return factors


# ---------------------------------------------------------------------------
# Tri-gram blocking over a beam
# ---------------------------------------------------------------------------


def _trigram_ban_mask_loop(hyps, vocab_size):
    k = hyps.shape[0]
    t = hyps.shape[1]
    out = np.zeros((k, vocab_size), dtype=np.bool_)
    if t < 2:
        return out
    for r in range(k):
        x = hyps[r, t - 2]
        y = hyps[r, t - 1]
        for i in range(t - 2):
            if hyps[r, i] == x and hyps[r, i + 1] == y:
                out[r, hyps[r, i + 2]] = True
    return out


def _trigram_ban_mask_numpy(hyps, vocab_size):
    hyps = np.asarray(hyps, dtype=np.int64)
    k, t = hyps.shape
    out = np.zeros((k, vocab_size), dtype=bool)
    if t < 3:
        return out
    hit = (hyps[:, :-2] == hyps[:, -2:-1]) & (hyps[:, 1:-1] == hyps[:, -1:])
    rows, cols = np.nonzero(hit)
    out[rows, hyps[rows, cols + 2]] = True
    return out


# ---------------------------------------------------------------------------
# Subset-sum counts (exact Mann-Whitney null distribution)
# ---------------------------------------------------------------------------


def _subset_sum_counts_loop(weights, size):
    total = 0
    for w in weights:
        total += w
    dp = np.zeros((size + 1, total + 1), dtype=np.float64)
    dp[0, 0] = 1.0
    for w in weights:
        for j in range(size, 0, -1):
            for s in range(total, w - 1, -1):
                dp[j, s] += dp[j - 1, s - w]
    return dp[size].copy()


def _subset_sum_counts_numpy(weights, size):
    weights = np.asarray(weights, dtype=np.int64)
    total = int(weights.sum())
    dp = np.zeros((size + 1, total + 1), dtype=np.float64)
    dp[0, 0] = 1.0
    for w in weights.tolist():
        if w == 0:
            dp[1:] += dp[:-1].copy()
        else:
            dp[1:, w:] += dp[:-1, :-w].copy()
    return dp[size].copy()


lcs_length_jit = njit(_lcs_length_loop)
mtld_factor_count_jit = njit(_mtld_factor_count_loop)
trigram_ban_mask_jit = njit(_trigram_ban_mask_loop)
subset_sum_counts_jit = njit(_subset_sum_counts_loop)


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two int sequences."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if NUMBA_ENABLED:
        return int(lcs_length_jit(a, b))
    return _lcs_length_numpy(a, b)


def mtld_factor_count(ids, n_types: int, threshold: float) -> float:
    """Full plus partial factor count of one MTLD pass over ``ids``.

    ``ids`` must be dense in ``[0, n_types)``. A factor closes whenever the
    running type-token ratio drops strictly below ``threshold``.
    """
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if NUMBA_ENABLED:
        return float(mtld_factor_count_jit(ids, int(n_types), float(threshold)))
    return _mtld_factor_count_numpy(ids, int(n_types), float(threshold))


def trigram_ban_mask(hyps, vocab_size: int) -> np.ndarray:
    """Boolean ``(k, vocab_size)`` mask of next tokens that would repeat a trigram.

    ``hyps`` is a ``(k, t)`` matrix of equally long token prefixes.
    """
    hyps = np.ascontiguousarray(hyps, dtype=np.int64)
    if hyps.ndim != 2:
        raise ValueError(f"hyps must be 2-D, got shape {hyps.shape}")
    if NUMBA_ENABLED:
        return trigram_ban_mask_jit(hyps, int(vocab_size))
    return _trigram_ban_mask_numpy(hyps, int(vocab_size))


def subset_sum_counts(weights, size: int) -> np.ndarray:
    """``out[s]`` = number of ``size``-subsets of ``weights`` summing to ``s``.

    Weights must be non-negative integers. Counts are float64 so large
    binomials stay representable.
    """
    weights = np.ascontiguousarray(weights, dtype=np.int64)
    if weights.size and weights.min() < 0:
        raise ValueError("weights must be non-negative")
    if NUMBA_ENABLED:
        return subset_sum_counts_jit(weights, int(size))
    return _subset_sum_counts_numpy(weights, int(size))
