"""Stage-2 input construction.

Layout of one compound sequence::

    [CLS] w_1 .. w_l [SEP] | A_11 A_12 .. A_mn [SEP]
    segment 0               | segment 1

Each perceivable pair ``A_ij`` is four marker tokens T-B, T-E, O-B, O-E that
reuse the position ids of the boundary words of target i and opinion j.
Sentence rows see only ``[CLS] X [SEP]``; marker rows additionally see the
four slots of their own pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .extraction import SpanSets

ABLATIONS = (None, "a", "b", "c", "d", "e", "f")
SLOT_KINDS = ("T-B", "T-E", "O-B", "O-E")


def check_ablation(mode):
    if mode not in ABLATIONS:
        raise ValueError(f"unknown ablation mode {mode!r}; expected one of a-f")
    return mode


def kept_slots(ablation=None):
    """Marker kinds present in each pair under an ablation mode."""
    if ablation == "a":
        return ("T-E", "O-E")
    if ablation == "b":
        return ("T-B", "O-B")
    if ablation == "c":
        return ()
    return SLOT_KINDS


@dataclass(frozen=True)
class PerceivablePair:
    target: int  # 0-based index into SpanSets.targets
    opinion: int
    slots: dict = field(default_factory=dict, compare=False)  # kind -> compound position
    fusion: tuple = ()  # positions whose hidden states are concatenated

    @property
    def positions(self):
        return tuple(self.slots[k] for k in SLOT_KINDS if k in self.slots)


@dataclass
class CompoundInput:
    token_ids: np.ndarray
    position_ids: np.ndarray
    segment_ids: np.ndarray
    mask: np.ndarray
    length: int  # sentence length l
    pairs: list[PerceivablePair]
    word_index: np.ndarray  # compound position -> word index, -1 elsewhere

    def __len__(self):
        return len(self.token_ids)

    @property
    def sentence_end(self):
        """One past the first [SEP]; columns below this form the sentence segment."""
        return self.length + 2

    @property
    def marker_count(self):
        return sum(len(p.slots) for p in self.pairs)


def build_pairs(spans: SpanSets):
    """All (target, opinion) index pairs, target-major."""
    return [(i, j) for i in range(spans.m) for j in range(spans.n)]


def _fusion(slots, spans, i, j, ablation):
    if ablation == "c":
        # no markers: first words of the two spans, offset by [CLS]
        return (spans.targets[i].start + 1, spans.opinions[j].start + 1)
    if ablation == "a":
        return (slots["T-E"], slots["O-E"])
    return (slots["T-B"], slots["O-B"])


def pair_capacity(length, max_len, ablation=None):
    per_pair = len(kept_slots(ablation))
    if per_pair == 0:
        return None
    return (max_len - (length + 3)) // per_pair


def build_compound(sentence_ids, spans: SpanSets, pairs, max_len, vocab_ids, ablation=None):
    """Pack ``pairs`` into as few compound inputs as ``max_len`` allows.

    ``vocab_ids`` is ``(cls, sep, (tb, te, ob, oe))``. Chunks are filled
    greedily in pair order; each chunk repeats the sentence segment.
    """
    check_ablation(ablation)
    cls_id, sep_id, marker_ids = vocab_ids
    marker_of = dict(zip(SLOT_KINDS, marker_ids))
    l = len(sentence_ids)
    kinds = kept_slots(ablation)
    capacity = pair_capacity(l, max_len, ablation)
    if l + 2 > max_len or (capacity is not None and capacity < 1):
        raise ValueError(f"sentence of {l} words leaves no room for a pair within max length {max_len}")
    pairs = list(pairs)
    if ablation == "c":
        chunks = [pairs]
    else:
        chunks = [pairs[k : k + capacity] for k in range(0, len(pairs), capacity)] or [[]]

    out = []
    for chunk in chunks:
        tokens = [cls_id, *sentence_ids, sep_id]
        positions = list(range(l + 2))
        segments = [0] * (l + 2)
        table = []
        for i, j in chunk:
            t, o = spans.targets[i], spans.opinions[j]
            boundary = {"T-B": t.start, "T-E": t.end, "O-B": o.start, "O-E": o.end}
            slots = {}
            for kind in kinds:
                slots[kind] = len(tokens)
                tokens.append(marker_of[kind])
                positions.append(boundary[kind] + 1)
                segments.append(0 if ablation == "d" else 1)
            table.append(PerceivablePair(i, j, slots, _fusion(slots, spans, i, j, ablation)))
        if ablation != "c":
            tokens.append(sep_id)
            positions.append(l + 1)
            segments.append(0 if ablation == "d" else 1)
        word_index = np.full(len(tokens), -1, dtype=np.int64)
        word_index[1 : l + 1] = np.arange(l)
        compound = CompoundInput(
            np.array(tokens, dtype=np.int64),
            np.array(positions, dtype=np.int64),
            np.array(segments, dtype=np.int64),
            np.zeros((0, 0), dtype=bool),
            l,
            table,
            word_index,
        )
        compound.mask = build_attention_field(compound, ablation)
        out.append(compound)
    return out


def build_attention_field(compound: CompoundInput, ablation=None):
    """Boolean ``[seq, seq]`` mask; True where the row may attend to the column."""
    n = len(compound)
    if ablation == "f":
        return np.ones((n, n), dtype=bool)
    x_end = compound.sentence_end
    mask = np.zeros((n, n), dtype=bool)
    mask[:, :x_end] = True
    if ablation == "e":
        marker_cols = [q for p in compound.pairs for q in p.positions]
        for pair in compound.pairs:
            rows = list(pair.positions)
            mask[np.ix_(rows, marker_cols)] = True
    else:
        for pair in compound.pairs:
            rows = list(pair.positions)
            mask[np.ix_(rows, rows)] = True
    if n > x_end:
        mask[n - 1, n - 1] = True  # trailing [SEP]
    return mask


def pad_compounds(compounds, pad_id):
    """Stack compound inputs into padded ``[batch, seq]`` arrays and masks."""
    width = max(len(c) for c in compounds)
    b = len(compounds)
    tokens = np.full((b, width), pad_id, dtype=np.int64)
    positions = np.zeros((b, width), dtype=np.int64)
    segments = np.zeros((b, width), dtype=np.int64)
    mask = np.zeros((b, width, width), dtype=bool)
    for r, c in enumerate(compounds):
        n = len(c)
        tokens[r, :n] = c.token_ids
        positions[r, :n] = c.position_ids
        segments[r, :n] = c.segment_ids
        mask[r, :n, :n] = c.mask
        mask[r, np.arange(n, width), np.arange(n, width)] = True
    return tokens, positions, segments, mask

