"""Stage 1: BIOES tagging of target and opinion spans."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .corpus import AnnotatedSentence, Span
from .encoder import Encoder, EncoderConfig

TAGS = ("O", "B-T", "I-T", "E-T", "S-T", "B-O", "I-O", "E-O", "S-O")
TAG_ID = {t: i for i, t in enumerate(TAGS)}


@dataclass
class SpanSets:
    targets: list[Span] = field(default_factory=list)
    opinions: list[Span] = field(default_factory=list)

    def __post_init__(self):
        self.targets = sorted(Span(*s) for s in self.targets)
        self.opinions = sorted(Span(*s) for s in self.opinions)

    @property
    def m(self):
        return len(self.targets)

    @property
    def n(self):
        return len(self.opinions)

    def all_spans(self):
        return [("T", s) for s in self.targets] + [("O", s) for s in self.opinions]

    @classmethod
    def from_sentence(cls, sentence: AnnotatedSentence):
        """Distinct gold target and opinion spans of ``sentence``.

        A span overlapping an earlier (by start, then length) span is dropped.
        """
        kinds = {}
        for t in sentence.triplets:
            kinds.setdefault(t.target, "T")
            kinds.setdefault(t.opinion, "O")
        chosen = []
        for span in sorted(kinds):
            if not any(span.overlaps(c) for c in chosen):
                chosen.append(span)
        return cls([s for s in chosen if kinds[s] == "T"], [s for s in chosen if kinds[s] == "O"])


def encode_spans(spans: SpanSets, length):
    labels = ["O"] * length
    taken = [False] * length
    for kind, span in spans.all_spans():
        if not 0 <= span.start <= span.end < length:
            raise ValueError(f"span {span} out of range for length {length}")
        if any(taken[span.start : span.end + 1]):
            raise ValueError(f"span {span} overlaps another span")
        for k in range(span.start, span.end + 1):
            taken[k] = True
        if span.start == span.end:
            labels[span.start] = f"S-{kind}"
        else:
            labels[span.start] = f"B-{kind}"
            for k in range(span.start + 1, span.end):
                labels[k] = f"I-{kind}"
            labels[span.end] = f"E-{kind}"
    return labels


def decode_spans(labels):
    """Strict BIOES decoding.

    Only ``S-x`` or ``B-x (I-x)* E-x`` runs become spans; every other
    fragment is discarded. Integer label ids are accepted too.
    """
    labels = [TAGS[l] if not isinstance(l, str) else l for l in labels]
    found = {"T": [], "O": []}
    start, kind = None, None
    for i, tag in enumerate(labels):
        prefix, _, k = tag.partition("-")
        if prefix == "S":
            found[k].append(Span(i, i))
            start = None
        elif prefix == "B":
            start, kind = i, k
        elif prefix == "I" and start is not None and k == kind:
            continue
        elif prefix == "E" and start is not None and k == kind:
            found[k].append(Span(start, i))
            start = None
        else:
            start = None
    return SpanSets(found["T"], found["O"])


def extraction_loss(dists, gold):
    """Summed token cross-entropy over one sentence or a padded batch.

    ``gold`` holds label ids; entries of -1 (padding, delimiters) are skipped.
    """
    gold = np.asarray(gold)
    onehot = np.zeros(dists.shape)
    idx = np.nonzero(gold >= 0)
    onehot[idx + (gold[idx],)] = 1.0
    return ag.cross_entropy(dists, onehot)


class ExtractionModel:
    """Encoder plus a 9-way token classifier over ``[CLS] w_1..w_l [SEP]``."""

    stage = "extract"

    def __init__(self, config: EncoderConfig, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.config = config
        self.encoder = Encoder(config, rng)
        self.params = dict(self.encoder.params)
        self.params["tagger.weight"] = Parameter(rng.normal(0.0, config.init_std, (config.hidden, len(TAGS))), "tagger.weight")
        self.params["tagger.bias"] = Parameter(np.zeros(len(TAGS)), "tagger.bias")

    def batch_inputs(self, id_seqs, vocab_ids):
        """Pad word-id sequences into the stage-1 layout.

        Returns token, position, segment ids and the mask. Padding rows
        attend only to themselves and are invisible to real positions.
        """
        cls_id, sep_id, pad_id = vocab_ids
        width = max(len(s) for s in id_seqs) + 2
        if width > self.config.max_len:
            raise ValueError(f"sentence of {width - 2} words exceeds max length {self.config.max_len}")
        b = len(id_seqs)
        tokens = np.full((b, width), pad_id, dtype=np.int64)
        positions = np.zeros((b, width), dtype=np.int64)
        mask = np.zeros((b, width, width), dtype=bool)
        for r, ids in enumerate(id_seqs):
            n = len(ids) + 2
            tokens[r, :n] = [cls_id, *ids, sep_id]
            positions[r, :n] = np.arange(n)
            mask[r, :n, :n] = True
            mask[r, np.arange(n, width), np.arange(n, width)] = True
        return tokens, positions, np.zeros_like(tokens), mask

    def tag_logits(self, reps):
        """Per-position 9-way distributions from ``[batch, seq, d]`` states."""
        return ag.softmax(reps @ self.params["tagger.weight"] + self.params["tagger.bias"])

    def forward(self, id_seqs, vocab_ids, rng=None, keep_attention=False):
        tokens, positions, segments, mask = self.batch_inputs(id_seqs, vocab_ids)
        out = self.encoder(tokens, positions, segments, mask, keep_attention, rng)
        return self.tag_logits(out.hidden), out

    def loss(self, id_seqs, label_seqs, vocab_ids, rng=None):
        """Mean over the batch of per-sentence summed cross-entropy."""
        dists, _ = self.forward(id_seqs, vocab_ids, rng)
        gold = np.full(dists.shape[:2], -1, dtype=np.int64)
        for r, labels in enumerate(label_seqs):
            gold[r, 1 : len(labels) + 1] = [TAG_ID[l] if isinstance(l, str) else l for l in labels]
        return extraction_loss(dists, gold) * (1.0 / len(id_seqs))

    def predict(self, id_seqs, vocab_ids):
        """Word-level label ids and decoded spans for each sentence."""
        dists, _ = self.forward(id_seqs, vocab_ids)
        out = []
        for r, ids in enumerate(id_seqs):
            labels = dists.data[r, 1 : len(ids) + 1].argmax(axis=-1)
            out.append((labels, decode_spans(labels)))
        return out
