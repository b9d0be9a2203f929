import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_spans

from aste_pairs.corpus import Span
from aste_pairs.extraction import SpanSets
from aste_pairs.pairing import SLOT_KINDS, build_attention_field, build_compound, build_pairs, pair_capacity

CLS, SEP, MARKERS = 2, 3, (4, 5, 6, 7)
VOCAB_IDS = (CLS, SEP, MARKERS)
SERVICE_SPANS = SpanSets([Span(1, 1), Span(4, 4)], [Span(0, 0), Span(6, 6)])


def service_compound(ablation=None, max_len=64):
    ids = list(range(10, 18))
    spans = SERVICE_SPANS
    return build_compound(ids, spans, build_pairs(spans), max_len, VOCAB_IDS, ablation)


def oracle_mask(length, n_pairs, total):
    """Visibility by direct set membership, with slots located by layout arithmetic."""
    sentence = set(range(length + 2))
    pair_of = {}
    for k in range(n_pairs):
        for s in range(4):
            pair_of[length + 2 + 4 * k + s] = k
    mask = np.zeros((total, total), dtype=bool)
    for p in range(total):
        if p in pair_of:
            field = sentence | {q for q, k in pair_of.items() if k == pair_of[p]}
        elif p >= length + 2:
            field = sentence | {p}
        else:
            field = sentence
        for q in range(total):
            mask[p, q] = q in field
    return mask


def test_build_pairs_empty():
    assert build_pairs(SpanSets([Span(0, 0)], [])) == []
    assert build_pairs(SpanSets([], [Span(0, 0)])) == []


def test_build_pairs_target_major_order():
    spans = SpanSets([Span(0, 0), Span(2, 2)], [Span(4, 4), Span(6, 6)])
    pairs = build_pairs(spans)
    assert pairs == [(0, 0), (0, 1), (1, 0), (1, 1)]
    [c] = build_compound(list(range(10, 18)), spans, pairs, 64, VOCAB_IDS)
    assert len(c) - (8 + 2) - 1 == 16


def test_build_pairs_one_target():
    pairs = build_pairs(SpanSets([Span(0, 0)], [Span(2, 2), Span(4, 4), Span(6, 6)]))
    assert len(pairs) == 3 and {i for i, _ in pairs} == {0}


def test_compound_layout_and_segments():
    [c] = service_compound()
    l = 8
    assert c.token_ids[0] == CLS and c.token_ids[l + 1] == SEP and c.token_ids[-1] == SEP
    assert list(c.token_ids[l + 2 : l + 6]) == list(MARKERS)
    assert (c.segment_ids[: l + 2] == 0).all() and (c.segment_ids[l + 2 :] == 1).all()
    assert list(c.position_ids[: l + 2]) == list(range(l + 2))
    assert c.position_ids[-1] == l + 1
    assert list(c.word_index[1 : l + 1]) == list(range(l))
    assert c.word_index[0] == -1 and (c.word_index[l + 1 :] == -1).all()
    for pair in c.pairs:
        assert pair.positions == tuple(range(pair.slots["T-B"], pair.slots["T-B"] + 4))


def test_marker_positions_are_shared():
    [c] = service_compound()
    # pair (service, dreadful): service is word 4, compound position 5
    pair = next(p for p in c.pairs if (p.target, p.opinion) == (1, 1))
    assert c.position_ids[pair.slots["T-B"]] == 5
    assert c.position_ids[pair.slots["T-E"]] == 5
    assert c.position_ids[pair.slots["O-B"]] == 7
    assert c.position_ids[pair.slots["O-E"]] == 7


def test_multiword_span_positions():
    spans = SpanSets([Span(1, 3)], [Span(5, 6)])
    [c] = build_compound(list(range(10, 18)), spans, build_pairs(spans), 64, VOCAB_IDS)
    slots = c.pairs[0].slots
    assert [c.position_ids[slots[k]] for k in SLOT_KINDS] == [2, 4, 6, 7]


def test_single_pair_length():
    spans = SpanSets([Span(0, 0)], [Span(2, 2)])
    [c] = build_compound(list(range(10, 15)), spans, build_pairs(spans), 64, VOCAB_IDS)
    assert len(c) == 5 + 2 + 4 + 1


def test_chunking_capacity():
    ten = list(range(10, 20))
    spans = SpanSets([Span(k, k) for k in range(0, 4)], [Span(k, k) for k in range(5, 10)])
    pairs = build_pairs(spans)
    assert len(pairs) == 20
    chunks = build_compound(ten, spans, pairs, 64, VOCAB_IDS)
    assert len(chunks) == 2
    assert pair_capacity(10, 64) == 12
    assert all(len(c) <= 64 for c in chunks)
    assert [len(c.pairs) for c in chunks] == [12, 8]
    assert [(p.target, p.opinion) for c in chunks for p in c.pairs] == pairs


def test_sentence_too_long_is_an_error():
    with pytest.raises(ValueError):
        build_compound(list(range(70)), SERVICE_SPANS, [(0, 0)], 64, VOCAB_IDS)
    with pytest.raises(ValueError):
        build_compound(list(range(60)), SERVICE_SPANS, [(0, 0)], 64, VOCAB_IDS)


def test_cls_row_sees_only_sentence():
    [c] = service_compound()
    assert c.mask[0].tolist() == [True] * 10 + [False] * (len(c) - 10)


def test_marker_row_sees_four_more_tokens():
    [c] = service_compound()
    first_tb = c.pairs[0].slots["T-B"]
    assert c.mask[first_tb].sum() == c.mask[0].sum() + 4
    assert c.mask[first_tb, first_tb : first_tb + 4].all()


def test_mask_basic_properties():
    [c] = service_compound()
    assert c.mask.any(axis=1).all()
    assert c.mask[:10, :10].all()
    assert (c.mask[:10, 10:] == False).all()  # noqa: E712


def test_service_mask_matches_oracle():
    [c] = service_compound()
    assert np.array_equal(c.mask, oracle_mask(8, 4, len(c)))
    assert np.array_equal(build_attention_field(c), c.mask)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1), st.integers(30, 80))
def test_mask_oracle_property(length, seed, max_len):
    spans = random_spans(np.random.default_rng(seed), length)
    if pair_capacity(length, max_len) < 1:
        return
    for c in build_compound(list(range(10, 10 + length)), spans, build_pairs(spans), max_len, VOCAB_IDS):
        assert np.array_equal(c.mask, oracle_mask(length, len(c.pairs), len(c)))
        x_end = length + 2
        assert not c.mask[:x_end, x_end:].any()
        for pair in c.pairs:
            outside = set(np.flatnonzero(c.mask[pair.slots["T-B"]])) - set(range(x_end))
            assert outside == set(pair.positions)


def test_ablation_a_keeps_end_tags():
    [c] = service_compound("a")
    assert all(set(p.slots) == {"T-E", "O-E"} for p in c.pairs)
    assert all(p.fusion == (p.slots["T-E"], p.slots["O-E"]) for p in c.pairs)
    assert len(c) == 10 + 2 * 4 + 1


def test_ablation_b_keeps_start_tags():
    [c] = service_compound("b")
    assert all(set(p.slots) == {"T-B", "O-B"} for p in c.pairs)
    assert all(p.fusion == (p.slots["T-B"], p.slots["O-B"]) for p in c.pairs)


def test_ablation_c_removes_marker_segment():
    [c] = service_compound("c")
    assert len(c) == 10 and c.marker_count == 0
    assert len(c.pairs) == 4
    # fusion falls back to the first word of each span
    service_dreadful = next(p for p in c.pairs if (p.target, p.opinion) == (1, 1))
    assert service_dreadful.fusion == (5, 7)
    assert c.mask.all()


def test_ablation_d_single_segment():
    [c] = service_compound("d")
    assert (c.segment_ids == 0).all()
    assert np.array_equal(c.mask, service_compound()[0].mask)


def test_ablation_e_markers_see_all_markers():
    [c] = service_compound("e")
    [base] = service_compound()
    markers = [q for p in c.pairs for q in p.positions]
    assert c.mask[np.ix_(markers, markers)].all()
    assert np.array_equal(c.mask[:10], base.mask[:10])
    assert np.array_equal(c.mask[-1], base.mask[-1])


def test_ablation_f_all_visible():
    [c] = service_compound("f")
    assert c.mask.all()


def test_unknown_ablation():
    with pytest.raises(ValueError):
        service_compound("g")
