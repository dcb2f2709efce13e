"""Per-document scoring, corpus aggregation and report files."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass

from .lexical import mtld, shannon_entropy
from .readability import MetricError, ari, coleman_liau, fre_german, text_stats, words_of
from .rouge import rouge_l, rouge_n
from .significance import mann_whitney_two_tailed

METRICS = (
    "rouge1_p", "rouge1_r", "rouge1_f",
    "rouge2_p", "rouge2_r", "rouge2_f",
    "rougeL_p", "rougeL_r", "rougeL_f",
    "fre", "cli", "ari", "see", "mtld",
)

TABLE_COLUMNS = (("R1", "rouge1_f", 100.0), ("R2", "rouge2_f", 100.0), ("RL", "rougeL_f", 100.0), ("FRE", "fre", 1.0))


def metric_tokens(text: str) -> list[str]:
    """Lowercased words (punctuation dropped) as used for ROUGE, SEE and MTLD."""
    return [w.lower() for w in words_of(text)]


def score_document(candidate: str, reference: str) -> dict:
    """Every metric for one candidate/reference pair; undefined values are ``None``."""
    c, r = metric_tokens(candidate), metric_tokens(reference)
    out = {}
    for name, score in (("rouge1", rouge_n(c, r, 1)), ("rouge2", rouge_n(c, r, 2)), ("rougeL", rouge_l(c, r))):
        out[f"{name}_p"] = score.precision
        out[f"{name}_r"] = score.recall
        out[f"{name}_f"] = score.f1
    stats = text_stats(candidate)
    for name, fn in (("fre", fre_german), ("cli", coleman_liau), ("ari", ari)):
        try:
            out[name] = fn(stats)
        except MetricError:
            out[name] = None
    out["see"] = shannon_entropy(c) if c else None
    out["mtld"] = mtld(c) if c else None
    return out


@dataclass
class MetricReport:
    documents: list
    aggregate: dict

    def to_jsonl(self) -> str:
        lines = [json.dumps({"doc": i, **doc}, sort_keys=False) for i, doc in enumerate(self.documents)]
        lines.append(json.dumps({"aggregate": self.aggregate}))
        return "\n".join(lines) + "\n"

    def table_row(self, system: str) -> list:
        row = [system]
        for _, key, scale in TABLE_COLUMNS:
            agg = self.aggregate[key]
            row.append("" if agg["mean"] is None else f"{agg['mean'] * scale:.2f}")
        return row


def aggregate(documents) -> dict:
    """Mean and sample standard deviation per metric over defined values."""
    out = {}
    for m in METRICS:
        vals = [d[m] for d in documents if d.get(m) is not None]
        if not vals:
            out[m] = {"mean": None, "stdev": None, "n": 0}
            continue
        mean = math.fsum(vals) / len(vals)
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[m] = {"mean": mean, "stdev": sd, "n": len(vals)}
    return out


def score_corpus(candidates, references) -> MetricReport:
    candidates, references = list(candidates), list(references)
    if len(candidates) != len(references):
        raise MetricError(f"{len(candidates)} candidates but {len(references)} references")
    docs = [score_document(c, r) for c, r in zip(candidates, references)]
    return MetricReport(docs, aggregate(docs))


def compare_reports(a: MetricReport, b: MetricReport) -> list[dict]:
    """Two-tailed Mann-Whitney per metric between two systems' per-document scores."""
    rows = []
    for m in METRICS:
        va = [d[m] for d in a.documents if d.get(m) is not None]
        vb = [d[m] for d in b.documents if d.get(m) is not None]
        if not va or not vb:
            rows.append({"metric": m, "u": None, "p": None, "method": None})
            continue
        res = mann_whitney_two_tailed(va, vb)
        rows.append({"metric": m, "u": res.u, "p": res.p, "method": res.method})
    return rows


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", *(c for c, _, _ in TABLE_COLUMNS)])
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
