from .lexical import MTLD_THRESHOLD, mtld, shannon_entropy
from .readability import (
    MetricError,
    TextStats,
    ari,
    coleman_liau,
    count_syllables_de,
    fre_german,
    split_sentences,
    text_stats,
    words_of,
)
from .report import MetricReport, aggregate, compare_reports, metric_tokens, score_corpus, score_document, table_csv
from .rouge import RougeScore, ngrams, rouge_l, rouge_n
from .significance import MannWhitneyResult, mann_whitney_two_tailed

__all__ = [
    "MTLD_THRESHOLD", "mtld", "shannon_entropy",
    "MetricError", "TextStats", "ari", "coleman_liau", "count_syllables_de", "fre_german",
    "split_sentences", "text_stats", "words_of",
    "MetricReport", "aggregate", "compare_reports", "metric_tokens", "score_corpus", "score_document", "table_csv",
    "RougeScore", "ngrams", "rouge_l", "rouge_n",
    "MannWhitneyResult", "mann_whitney_two_tailed",
]
