import numpy as np
import pytest

from conftest import tiny_config

from aste_pairs import autograd as ag
from aste_pairs.encoder import Encoder, EncoderConfig, dump_attention


@pytest.fixture
def encoder():
    return Encoder(tiny_config(), np.random.default_rng(0))


def test_config_requires_divisible_heads():
    with pytest.raises(ValueError):
        EncoderConfig(10, hidden=10, heads=3)


def test_default_config_is_desk_scale():
    c = EncoderConfig(100)
    assert (c.hidden, c.layers, c.heads, c.ffn, c.max_len, c.segments) == (64, 2, 4, 256, 256, 2)


def test_identical_ids_give_identical_rows(encoder):
    x = encoder.embed([5, 9, 5], [3, 1, 3], [0, 1, 0]).data[0]
    assert np.array_equal(x[0], x[2])


def test_shared_position_gives_shared_position_embedding(encoder):
    table = encoder.p("embeddings.position").data
    # a marker placed at the first word of its span reuses that word's position id
    word_pos, marker_pos = 5, 5
    assert np.array_equal(table[word_pos], table[marker_pos])
    ids = np.array([[7, 4]])
    raw = ag.embedding(encoder.p("embeddings.position"), np.array([[word_pos, marker_pos]])).data
    assert np.array_equal(raw[0, 0], raw[0, 1])
    assert ids.shape == raw.shape[:2]


def test_segment_changes_row_by_segment_delta(encoder):
    tok = encoder.p("embeddings.token").data
    pos = encoder.p("embeddings.position").data
    seg = encoder.p("embeddings.segment").data
    x = encoder.embed([5, 5], [2, 2], [0, 1]).data[0]
    assert not np.allclose(x[0], x[1])

    def ln(v):
        v = v - v.mean()
        return v / np.sqrt((v**2).mean() + 1e-12)

    np.testing.assert_allclose(x[0], ln(tok[5] + pos[2] + seg[0]), atol=1e-12)
    np.testing.assert_allclose(x[1], ln(tok[5] + pos[2] + seg[1]), atol=1e-12)


def test_embed_rejects_out_of_range_ids(encoder):
    with pytest.raises(IndexError):
        encoder.embed([1], [encoder.config.max_len], [0])
    with pytest.raises(IndexError):
        encoder.embed([1], [0], [2])
    with pytest.raises(ValueError):
        encoder.embed([1, 2], [0], [0])


def test_full_mask_output_shape(encoder):
    n = 7
    out = encoder.encode(encoder.embed(np.arange(n), np.arange(n), np.zeros(n)), np.ones((n, n), bool))
    assert out.hidden.shape == (1, n, encoder.config.hidden)
    assert out.attention is None


def test_diagonal_mask_rows_are_independent(encoder):
    n = 6
    emb = encoder.embed(np.arange(n) + 8, np.arange(n), np.zeros(n)).data
    base = encoder.encode(ag.Tensor(emb), np.eye(n, dtype=bool)).hidden.data
    perturbed = emb.copy()
    perturbed[0, 1:] += np.random.default_rng(0).normal(size=(n - 1, emb.shape[-1]))
    out = encoder.encode(ag.Tensor(perturbed), np.eye(n, dtype=bool)).hidden.data
    assert np.array_equal(base[0, 0], out[0, 0])
    assert not np.allclose(base[0, 1:], out[0, 1:])


def test_attention_rows_are_distributions_over_field(encoder):
    n = 6
    mask = np.tril(np.ones((n, n), dtype=bool))
    out = encoder(np.arange(n), np.arange(n), np.zeros(n), mask, keep_attention=True)
    assert out.attention.shape == (1, encoder.config.layers, encoder.config.heads, n, n)
    for q in range(n):
        rows = dump_attention(out, q)
        np.testing.assert_allclose(rows.sum(axis=-1), 1.0, atol=1e-9)
        assert (rows[..., ~mask[q]] == 0).all()


def test_dump_attention_errors(encoder):
    n = 4
    out = encoder(np.arange(n), np.arange(n), np.zeros(n), np.ones((n, n), bool))
    with pytest.raises(ValueError):
        dump_attention(out, 0)
    out = encoder(np.arange(n), np.arange(n), np.zeros(n), np.ones((n, n), bool), keep_attention=True)
    with pytest.raises(IndexError):
        dump_attention(out, n)


def test_encode_propagates_empty_mask_row(encoder):
    n = 3
    mask = np.ones((n, n), bool)
    mask[1] = False
    with pytest.raises(ag.MaskError):
        encoder(np.arange(n), np.arange(n), np.zeros(n), mask)


def test_deterministic_without_dropout_rng():
    enc = Encoder(tiny_config(dropout=0.1), np.random.default_rng(3))
    n = 5
    args = (np.arange(n), np.arange(n), np.zeros(n), np.ones((n, n), bool))
    assert np.array_equal(enc(*args).hidden.data, enc(*args).hidden.data)
    noisy = enc(*args, rng=np.random.default_rng(0)).hidden.data
    assert not np.array_equal(noisy, enc(*args).hidden.data)


def test_batched_equals_single(encoder):
    n = 5
    single = encoder(np.arange(n), np.arange(n), np.zeros(n), np.ones((n, n), bool)).hidden.data[0]
    tokens = np.stack([np.arange(n), np.arange(n) + 3])
    mask = np.ones((2, n, n), bool)
    batch = encoder(tokens, np.tile(np.arange(n), (2, 1)), np.zeros((2, n)), mask).hidden.data
    np.testing.assert_allclose(batch[0], single, atol=1e-12)
