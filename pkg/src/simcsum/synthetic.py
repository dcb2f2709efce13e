"""Synthetic instance triples for smoke tests and overfitting checks.

Sources are distinct "English" word ids. The simplification copies the
source and inserts a marker word after every third token. The summary is the
first half of the source pushed through a fixed word permutation into a
disjoint "German" vocabulary.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MARKER = "mk"


def make_synthetic_records(n: int = 32, seed: int = 0, n_words: int = 24, min_len: int = 6,
                           max_len: int = 10) -> list[dict]:
    if max_len > n_words:
        raise ValueError("max_len cannot exceed n_words (sources use distinct words)")
    rng = np.random.default_rng([seed, 0x5717])
    perm = rng.permutation(n_words)
    records = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        src = [int(i) for i in rng.choice(n_words, size=length, replace=False)]
        simp = []
        for k, w in enumerate(src, start=1):
            simp.append(f"e{w:02d}")
            if k % 3 == 0:
                simp.append(MARKER)
        summ = [f"g{int(perm[w]):02d}" for w in src[: length // 2]]
        records.append({
            "source": " ".join(f"e{w:02d}" for w in src),
            "simplified": " ".join(simp),
            "summary": " ".join(summ),
        })
    return records


def write_jsonl(records, path) -> None:
    Path(path).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")
