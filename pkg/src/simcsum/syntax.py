"""Syntactic features from external parser output.

Reads CoNLL-U dependency parses and one-tree-per-line bracketed constituency
parses, and computes average sentence length (ASL), average dependency
distance (ADD), average dependents per word (ADW) and average tree height
(ATH). Every feature is averaged per sentence first, then per document.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

UMLAUTS = {"ä": "ae", "ö": "oe", "ü": "ue", "Ä": "Ae", "Ö": "Oe", "Ü": "Ue", "ß": "ss", "ẞ": "SS"}
_UMLAUT_TABLE = str.maketrans(UMLAUTS)


class SyntaxParseError(ValueError):
    """Malformed CoNLL-U or bracketed-tree input."""


def normalize_umlauts(text: str) -> str:
    return text.translate(_UMLAUT_TABLE)


# ---------------------------------------------------------------------------
# CoNLL-U
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DepToken:
    index: int
    form: str
    head: int
    deprel: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"

    def to_line(self) -> str:
        return "\t".join((str(self.index), self.form, self.lemma, self.upos, self.xpos, self.feats,
                          str(self.head), self.deprel, self.deps, self.misc))


@dataclass
class DepSentence:
    tokens: list
    comments: list = field(default_factory=list)
    extras: list = field(default_factory=list)  # (n word lines before it, raw line) for ranges / empty nodes

    def __len__(self):
        return len(self.tokens)

    @property
    def starts_document(self) -> bool:
        return any(c.startswith("# newdoc") for c in self.comments)

    def to_text(self) -> str:
        lines = list(self.comments)
        pending = sorted(self.extras, key=lambda e: e[0])
        k = 0
        for i, tok in enumerate(self.tokens):
            while k < len(pending) and pending[k][0] <= i:
                lines.append(pending[k][1])
                k += 1
            lines.append(tok.to_line())
        lines.extend(raw for _, raw in pending[k:])
        return "\n".join(lines) + "\n"


def _validate(sent: DepSentence, number: int) -> None:
    n = len(sent.tokens)
    for pos, tok in enumerate(sent.tokens, start=1):
        if tok.index != pos:
            raise SyntaxParseError(f"sentence {number}: token ids are not contiguous from 1 (found {tok.index} at position {pos})")
        if not 0 <= tok.head <= n:
            raise SyntaxParseError(f"sentence {number}: token {tok.index} has dangling head {tok.head}")
    roots = sum(1 for t in sent.tokens if t.head == 0)
    if roots != 1:
        raise SyntaxParseError(f"sentence {number}: expected exactly one root, found {roots}")


def parse_conllu(text: str) -> list[DepSentence]:
    """Parse CoNLL-U; multiword ranges (``1-2``) and empty nodes (``1.1``) are kept verbatim but ignored."""
    sentences = []
    cur = None
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            if cur is not None:
                if not cur.tokens:
                    raise SyntaxParseError(f"sentence {len(sentences) + 1} (line {lineno}): no word tokens")
                _validate(cur, len(sentences) + 1)
                sentences.append(cur)
                cur = None
            continue
        if cur is None:
            cur = DepSentence([])
        if line.startswith("#"):
            if cur.tokens or cur.extras:
                raise SyntaxParseError(f"line {lineno}: comment inside a sentence")
            cur.comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise SyntaxParseError(f"sentence {len(sentences) + 1} (line {lineno}): expected 10 columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            cur.extras.append((len(cur.tokens), line))
            continue
        try:
            index, head = int(cols[0]), int(cols[6])
        except ValueError:
            raise SyntaxParseError(f"sentence {len(sentences) + 1} (line {lineno}): non-integer id or head") from None
        cur.tokens.append(DepToken(index, cols[1], head, cols[7], cols[2], cols[3], cols[4], cols[5], cols[8], cols[9]))
    if cur is not None:
        if not cur.tokens:
            raise SyntaxParseError(f"sentence {len(sentences) + 1}: no word tokens")
        _validate(cur, len(sentences) + 1)
        sentences.append(cur)
    return sentences


def format_conllu(sentences) -> str:
    return "".join(s.to_text() + "\n" for s in sentences)


def split_documents(sentences) -> list[list[DepSentence]]:
    """Group sentences at ``# newdoc`` comments; no markers means one document."""
    docs = []
    for s in sentences:
        if s.starts_document or not docs:
            docs.append([])
        docs[-1].append(s)
    return docs


def _mean(xs):
    return math.fsum(xs) / len(xs) if xs else 0.0


def dependency_distances(sent: DepSentence) -> list[int]:
    return [abs(t.index - t.head) for t in sent.tokens if t.head != 0]


def dependents_per_word(sent: DepSentence) -> list[int]:
    counts = [0] * len(sent.tokens)
    for t in sent.tokens:
        if t.head:
            counts[t.head - 1] += 1
    return counts


def sentence_add(sent: DepSentence) -> float | None:
    d = dependency_distances(sent)
    return _mean(d) if d else None


def sentence_adw(sent: DepSentence) -> float:
    return _mean(dependents_per_word(sent))


def avg_dependency_distance(sentences) -> float:
    """Sentence means of ``|dependent - head|``; sentences without dependencies are skipped."""
    per = [v for v in (sentence_add(s) for s in sentences) if v is not None]
    return _mean(per)


def avg_dependents_per_word(sentences) -> float:
    return _mean([sentence_adw(s) for s in sentences])


def avg_sentence_length(sentences) -> float:
    """Tokens per sentence (punctuation included), averaged over sentences."""
    return _mean([len(s) for s in sentences])


# ---------------------------------------------------------------------------
# Bracketed constituency trees
# ---------------------------------------------------------------------------


@dataclass
class ConstTree:
    label: str
    children: list  # ConstTree or str leaves

    def height(self) -> int:
        """Edges on the longest root-to-leaf path; a preterminal over a leaf has height 1."""
        return 1 + max(c.height() if isinstance(c, ConstTree) else 0 for c in self.children)

    def leaves(self) -> list[str]:
        out = []
        for c in self.children:
            out.extend(c.leaves() if isinstance(c, ConstTree) else [c])
        return out

    def to_text(self) -> str:
        inner = " ".join(c.to_text() if isinstance(c, ConstTree) else c for c in self.children)
        return f"({self.label} {inner})" if self.label else f"({inner})"


def _lex(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def parse_bracketed(text: str) -> ConstTree:
    """Parse one ``(LABEL child ...)`` tree; whitespace-insensitive."""
    toks = list(_lex(text))
    if not toks:
        raise SyntaxParseError("offset 0: empty tree")
    pos = 0

    def node():
        nonlocal pos
        tok, off = toks[pos]
        if tok != "(":
            raise SyntaxParseError(f"offset {off}: expected '(' but found {tok!r}")
        pos += 1
        if pos >= len(toks):
            raise SyntaxParseError(f"offset {off}: unbalanced parentheses")
        label = ""
        if toks[pos][0] not in "()":
            label = toks[pos][0]
            pos += 1
        children = []
        while True:
            if pos >= len(toks):
                raise SyntaxParseError(f"offset {off}: unbalanced parentheses")
            tok, coff = toks[pos]
            if tok == ")":
                pos += 1
                break
            if tok == "(":
                children.append(node())
            else:
                children.append(tok)
                pos += 1
        if not children:
            raise SyntaxParseError(f"offset {off}: empty node")
        return ConstTree(label, children)

    tree = node()
    if pos != len(toks):
        raise SyntaxParseError(f"offset {toks[pos][1]}: trailing input after tree")
    return tree


def parse_tree_file(text: str, normalize: bool = True) -> list[list[ConstTree]]:
    """One tree per line; blank lines separate documents."""
    if normalize:
        text = normalize_umlauts(text)
    docs, cur = [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            if cur:
                docs.append(cur)
                cur = []
            continue
        try:
            cur.append(parse_bracketed(line))
        except SyntaxParseError as exc:
            raise SyntaxParseError(f"line {lineno}: {exc}") from None
    if cur:
        docs.append(cur)
    return docs


def format_tree_file(docs) -> str:
    return "\n".join("".join(t.to_text() + "\n" for t in doc) for doc in docs)


def avg_tree_height(trees) -> float:
    return _mean([t.height() for t in trees])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntaxReport:
    asl: float
    add: float
    adw: float
    ath: float
    asl_sd: float
    add_sd: float
    adw_sd: float
    ath_sd: float
    sentences: int

    def to_record(self) -> dict:
        return {"asl": self.asl, "add": self.add, "adw": self.adw, "ath": self.ath,
                "asl_sd": self.asl_sd, "add_sd": self.add_sd, "adw_sd": self.adw_sd, "ath_sd": self.ath_sd,
                "sentences": self.sentences}


def _sd(xs):
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def syntax_report(sentences, trees) -> SyntaxReport:
    lengths = [len(s) for s in sentences]
    adds = [v for v in (sentence_add(s) for s in sentences) if v is not None]
    adws = [sentence_adw(s) for s in sentences]
    heights = [t.height() for t in trees]
    return SyntaxReport(_mean(lengths), _mean(adds), _mean(adws), _mean(heights),
                        _sd(lengths), _sd(adds), _sd(adws), _sd(heights), len(sentences))


def pair_documents(dep_docs, tree_docs):
    """Align dependency and tree documents; a single tree block is split by dependency sentence counts."""
    if len(dep_docs) == len(tree_docs):
        return list(zip(dep_docs, tree_docs))
    if len(tree_docs) == 1 and sum(len(d) for d in dep_docs) == len(tree_docs[0]):
        out, k = [], 0
        for d in dep_docs:
            out.append((d, tree_docs[0][k:k + len(d)]))
            k += len(d)
        return out
    raise SyntaxParseError(f"{len(dep_docs)} dependency documents but {len(tree_docs)} tree documents")


def analyze(conllu_text: str, trees_text: str) -> list[SyntaxReport]:
    """Per-document reports; umlauts in the tree text are normalized first."""
    dep_docs = split_documents(parse_conllu(conllu_text))
    tree_docs = parse_tree_file(trees_text, normalize=True)
    return [syntax_report(d, t) for d, t in pair_documents(dep_docs, tree_docs)]


def summarize(reports) -> dict:
    """Document-level mean and stdev of each feature, for one input set."""
    out = {}
    for key in ("asl", "add", "adw", "ath"):
        vals = [getattr(r, key) for r in reports]
        out[key] = (_mean(vals), _sd(vals))
    return out
