"""Two-tailed Mann-Whitney U test.

Small samples use the exact permutation distribution of the rank sum
(midranks, so ties are handled); larger ones use the normal approximation
with tie-corrected variance and a 0.5 continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.stats import rankdata

from ..kernels import subset_sum_counts
from .readability import MetricError

EXACT_MAX_TOTAL = 20

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str


def _u_statistic(a, b):
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)  # midranks
    r1 = float(ranks[: a.size].sum())
    return r1 - a.size * (a.size + 1) / 2.0, ranks, pooled


def _normal_p(u: float, n1: int, n2: int, pooled) -> float:
    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    z = max(abs(u - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, 2.0 * (1.0 - _STD_NORMAL.cdf(z)))


def _exact_p(u: float, n1: int, n2: int, ranks) -> float:
    doubled = np.rint(ranks * 2).astype(np.int64)  # midranks are multiples of 1/2
    counts = subset_sum_counts(doubled, n1)
    sums = np.arange(counts.size)
    # 2U = 2R1 - n1(n1+1); compare |2U - n1 n2| on integers
    dev = np.abs(sums - n1 * (n1 + 1) - n1 * n2)
    obs = abs(round(2 * u) - n1 * n2)
    return float(counts[dev >= obs].sum() / counts.sum())


def mann_whitney_two_tailed(sample_a, sample_b, method: str = "auto") -> MannWhitneyResult:
    """U for ``sample_a`` and its two-tailed p-value.

    ``method`` is ``"exact"``, ``"normal"`` or ``"auto"`` (exact when
    ``n1 + n2 <= EXACT_MAX_TOTAL``).
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise MetricError("Mann-Whitney needs two non-empty samples")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise MetricError("Mann-Whitney samples must be finite")
    if method == "auto":
        method = "exact" if a.size + b.size <= EXACT_MAX_TOTAL else "normal"
    u, ranks, pooled = _u_statistic(a, b)
    if method == "exact":
        p = _exact_p(u, a.size, b.size, ranks)
    elif method == "normal":
        p = _normal_p(u, a.size, b.size, pooled)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MannWhitneyResult(u, min(1.0, p), method)
