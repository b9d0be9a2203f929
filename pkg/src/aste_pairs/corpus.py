"""ASTE-DATA-V2 style dataset files, vocabulary and id conversion.

A line looks like::

    Great food but the service was dreadful !####[([1], [0], 'POS'), ([4], [6], 'NEG')]

The left part is the whitespace tokenised sentence, the right part a Python
literal list of ``(target indices, opinion indices, polarity)`` tuples.
"""
from __future__ import annotations

import ast
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

POLARITIES = ("POS", "NEU", "NEG")
SEPARATOR = "####"

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
TB, TE, OB, OE = "[T-B]", "[T-E]", "[O-B]", "[O-E]"
RESERVED = (PAD, UNK, CLS, SEP, TB, TE, OB, OE)

# published split sizes: sentences, POS, NEU, NEG
REFERENCE_STATS = {
    "14res": {"train": (1266, 1692, 166, 480), "dev": (310, 404, 54, 119), "test": (492, 773, 66, 155)},
    "14lap": {"train": (906, 817, 126, 517), "dev": (219, 169, 36, 141), "test": (328, 364, 63, 116)},
    "15res": {"train": (605, 783, 25, 205), "dev": (148, 185, 11, 53), "test": (322, 317, 25, 143)},
    "16res": {"train": (857, 1015, 50, 329), "dev": (210, 252, 11, 76), "test": (326, 407, 29, 78)},
}


class ParseError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class Span(NamedTuple):
    """Inclusive word interval."""

    start: int
    end: int

    def __len__(self):
        return self.end - self.start + 1

    def overlaps(self, other):
        return self.start <= other.end and other.start <= self.end

    def __str__(self):
        return f"{self.start}..{self.end}"


class Triplet(NamedTuple):
    target: Span
    opinion: Span
    polarity: str


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: tuple[str, ...]
    triplets: tuple[Triplet, ...] = ()

    def __post_init__(self):
        n = len(self.tokens)
        seen = set()
        for t in self.triplets:
            for span in (t.target, t.opinion):
                if not 0 <= span.start <= span.end < n:
                    raise ValueError(f"span {span} out of range for {n} tokens")
            if t.target.overlaps(t.opinion):
                raise ValueError(f"target {t.target} overlaps opinion {t.opinion}")
            if t.polarity not in POLARITIES:
                raise ValueError(f"unknown polarity {t.polarity!r}")
            if t in seen:
                raise ValueError(f"duplicate triplet {t}")
            seen.add(t)

    def __len__(self):
        return len(self.tokens)

    @property
    def text(self):
        return " ".join(self.tokens)


@dataclass
class SplitStats:
    sentences: int = 0
    polarity: Counter = field(default_factory=Counter)

    def row(self):
        return (self.sentences, self.polarity["POS"], self.polarity["NEU"], self.polarity["NEG"])


def _span_from_indices(indices, n_tokens, lineno):
    if not isinstance(indices, list) or not indices:
        raise ParseError("index list must be a non-empty list", lineno)
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in indices):
        raise ParseError(f"non-integer index in {indices}", lineno)
    for a, b in zip(indices, indices[1:]):
        if b != a + 1:
            raise ParseError(f"index list {indices} is not contiguous", lineno)
    if indices[0] < 0 or indices[-1] >= n_tokens:
        raise ParseError(f"index list {indices} out of range for {n_tokens} tokens", lineno)
    return Span(indices[0], indices[-1])


def parse_line(line, lineno=None):
    sentence, sep, annotation = line.rstrip("\r\n").partition(SEPARATOR)
    if not sep:
        raise ParseError(f"missing {SEPARATOR!r} separator", lineno)
    tokens = tuple(sentence.split())
    if not tokens:
        raise ParseError("empty sentence", lineno)
    try:
        raw = ast.literal_eval(annotation.strip())
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError) as exc:
        raise ParseError(f"malformed annotation: {exc.__class__.__name__}", lineno) from None
    if not isinstance(raw, list):
        raise ParseError("annotation must be a list", lineno)
    triplets = []
    for item in raw:
        if not isinstance(item, tuple) or len(item) != 3:
            raise ParseError(f"annotation tuple must have 3 fields: {item!r}", lineno)
        t_idx, o_idx, polarity = item
        if polarity not in POLARITIES:
            raise ParseError(f"unknown polarity tag {polarity!r}", lineno)
        target = _span_from_indices(t_idx, len(tokens), lineno)
        opinion = _span_from_indices(o_idx, len(tokens), lineno)
        triplets.append(Triplet(target, opinion, polarity))
    try:
        return AnnotatedSentence(tokens, tuple(triplets))
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def format_line(sentence):
    """Inverse of :func:`parse_line`."""
    parts = []
    for t in sentence.triplets:
        ti = list(range(t.target.start, t.target.end + 1))
        oi = list(range(t.opinion.start, t.opinion.end + 1))
        parts.append(f"({ti}, {oi}, '{t.polarity}')")
    return f"{sentence.text}{SEPARATOR}[{', '.join(parts)}]"


def read_sentences(path):
    """Read one sentence per line; annotations, when present, are parsed."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            if SEPARATOR in line:
                out.append(parse_line(line, lineno))
            else:
                out.append(AnnotatedSentence(tuple(line.split())))
    return out


def load_split(path):
    sentences = []
    stats = SplitStats()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            sent = parse_line(line, lineno)
            sentences.append(sent)
            stats.sentences += 1
            stats.polarity.update(t.polarity for t in sent.triplets)
    return sentences, stats


def dataset_stats(root):
    """Stats for every ``<dataset>/<split>_triplets.txt`` found under ``root``."""
    root = Path(root)
    table = {}
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        for split in ("train", "dev", "test"):
            path = d / f"{split}_triplets.txt"
            if path.exists():
                table.setdefault(d.name, {})[split] = load_split(path)[1]
    return table


class Vocabulary:
    def __init__(self, words=()):
        self.itos = list(RESERVED)
        for w in words:
            if w not in RESERVED:
                self.itos.append(w)
        self.stoi = {w: i for i, w in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate vocabulary entries")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, word):
        return word.lower() in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __getitem__(self, word):
        # reserved tokens are reachable only through the *_id properties
        return self.stoi.get(word.lower(), self.stoi[UNK])

    @property
    def pad_id(self):
        return self.stoi[PAD]

    @property
    def unk_id(self):
        return self.stoi[UNK]

    @property
    def cls_id(self):
        return self.stoi[CLS]

    @property
    def sep_id(self):
        return self.stoi[SEP]

    @property
    def marker_ids(self):
        """Ids of the four marker tokens in slot order T-B, T-E, O-B, O-E."""
        return tuple(self.stoi[m] for m in (TB, TE, OB, OE))

    def to_json(self):
        return json.dumps(self.itos)

    @classmethod
    def from_list(cls, itos):
        if tuple(itos[: len(RESERVED)]) != RESERVED:
            raise ValueError("vocabulary does not start with the reserved tokens")
        return cls(itos[len(RESERVED):])


def build_vocab(sentences, min_freq=1):
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter(tok.lower() for s in sentences for tok in s.tokens)
    return Vocabulary(sorted(w for w, c in counts.items() if c >= min_freq))


def encode_tokens(sentence, vocab):
    tokens = sentence.tokens if isinstance(sentence, AnnotatedSentence) else sentence
    return [vocab[tok] for tok in tokens]
