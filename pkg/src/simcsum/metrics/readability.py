"""German readability formulas and the text statistics they consume.

Segmentation rules: a sentence ends at ``.``, ``!`` or ``?`` followed by
whitespace and an uppercase letter, digit or quote. Abbreviations are not
special-cased. A word is a maximal run of letters, digits and hyphens that
contains at least one letter or digit. ``L`` counts every non-whitespace
character, so it covers letters, digits and punctuation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

VOWELS = frozenset("aeiouäöüy")

_SENT_BOUNDARY = re.compile(r"(?<=[.!?])\s+(?=[A-ZÄÖÜ0-9\"'„“«‚])")
_WORD = re.compile(r"(?:[^\W_]|-)+")


class MetricError(ValueError):
    """Input on which a metric is undefined."""


@dataclass(frozen=True)
class TextStats:
    sentences: int
    words: int
    characters: int
    syllables: int
    sentence_words: tuple = ()


def count_syllables_de(word: str) -> int:
    """Number of vowel groups (diphthongs are one group); at least 1 if the word has a letter."""
    count = 0
    prev = False
    for ch in word.lower():
        is_v = ch in VOWELS
        if is_v and not prev:
            count += 1
        prev = is_v
    if count == 0 and any(ch.isalpha() for ch in word):
        return 1
    return count


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENT_BOUNDARY.split(text.strip()) if s.strip()]


def words_of(text: str) -> list[str]:
    return [w for w in _WORD.findall(text) if any(ch.isalnum() for ch in w)]


def text_stats(text: str) -> TextStats:
    per_sentence = [len(words_of(s)) for s in split_sentences(text)]
    per_sentence = tuple(n for n in per_sentence if n > 0)
    words = words_of(text)
    return TextStats(
        sentences=len(per_sentence),
        words=len(words),
        characters=sum(1 for ch in text if not ch.isspace()),
        syllables=sum(count_syllables_de(w) for w in words),
        sentence_words=per_sentence,
    )


def _stats(x) -> TextStats:
    return x if isinstance(x, TextStats) else text_stats(x)


def fre_german(text) -> float:
    """Amstad's German Flesch Reading Ease, unclamped. Accepts text or :class:`TextStats`."""
    s = _stats(text)
    if s.words == 0:
        raise MetricError("Flesch Reading Ease is undefined for text without words")
    return 180.0 - s.words / s.sentences - 58.5 * (s.syllables / s.words)


def coleman_liau(text) -> float:
    s = _stats(text)
    if s.words == 0:
        raise MetricError("Coleman-Liau is undefined for text without words")
    return 5.88 * (s.characters / s.words) - 29.6 * (s.sentences / s.words) - 15.8


def ari(text) -> float:
    s = _stats(text)
    if s.words == 0:
        raise MetricError("ARI is undefined for text without words")
    if s.sentences == 0:
        raise MetricError("ARI is undefined for text without sentences")
    return 4.71 * (s.characters / s.words) + 0.5 * (s.words / s.sentences) - 21.43
