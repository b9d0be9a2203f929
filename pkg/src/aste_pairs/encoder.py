"""Post-LN transformer encoder with token, position and segment embeddings.

Every forward pass takes its own boolean attention mask, so the same
encoder serves the plain sentence pass and the compound pass with appended
marker tokens.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .autograd import Parameter


@dataclass
class EncoderConfig:
    vocab_size: int
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    ffn: int = 256
    max_len: int = 256
    segments: int = 2
    dropout: float = 0.1
    init_std: float = 0.02

    def __post_init__(self):
        if self.hidden % self.heads:
            raise ValueError(f"hidden size {self.hidden} not divisible by {self.heads} heads")

    def to_dict(self):
        return asdict(self)


@dataclass
class EncoderOutput:
    hidden: ag.Tensor  # [batch, seq, d]
    attention: np.ndarray | None = None  # [batch, layers, heads, seq, seq]
    mask: np.ndarray | None = None  # [batch, seq, seq]


def _normal(rng, shape, std):
    return rng.normal(0.0, std, size=shape)


class Encoder:
    def __init__(self, config: EncoderConfig, rng=None, prefix="encoder"):
        self.config = config
        rng = np.random.default_rng(0) if rng is None else rng
        c, std = config, config.init_std
        d = c.hidden
        self.params: dict[str, Parameter] = {}

        def add(name, value):
            full = f"{prefix}.{name}"
            self.params[full] = Parameter(value, full)

        add("embeddings.token", _normal(rng, (c.vocab_size, d), std))
        add("embeddings.position", _normal(rng, (c.max_len, d), std))
        add("embeddings.segment", _normal(rng, (c.segments, d), std))
        add("embeddings.norm.gain", np.ones(d))
        add("embeddings.norm.bias", np.zeros(d))
        for i in range(c.layers):
            for proj in ("query", "key", "value", "output"):
                add(f"layers.{i}.attention.{proj}.weight", _normal(rng, (d, d), std))
                add(f"layers.{i}.attention.{proj}.bias", np.zeros(d))
            add(f"layers.{i}.attention.norm.gain", np.ones(d))
            add(f"layers.{i}.attention.norm.bias", np.zeros(d))
            add(f"layers.{i}.ffn.inner.weight", _normal(rng, (d, c.ffn), std))
            add(f"layers.{i}.ffn.inner.bias", np.zeros(c.ffn))
            add(f"layers.{i}.ffn.outer.weight", _normal(rng, (c.ffn, d), std))
            add(f"layers.{i}.ffn.outer.bias", np.zeros(d))
            add(f"layers.{i}.ffn.norm.gain", np.ones(d))
            add(f"layers.{i}.ffn.norm.bias", np.zeros(d))
        self.prefix = prefix

    def p(self, name):
        return self.params[f"{self.prefix}.{name}"]

    def embed(self, token_ids, position_ids, segment_ids, rng=None):
        """Sum of token, position and segment embeddings, layer normalised.

        Accepts ``[seq]`` or ``[batch, seq]`` id arrays; output is
        ``[batch, seq, d]``.
        """
        token_ids, position_ids, segment_ids = (np.atleast_2d(np.asarray(a, dtype=np.int64)) for a in (token_ids, position_ids, segment_ids))
        if not token_ids.shape == position_ids.shape == segment_ids.shape:
            raise ValueError("token, position and segment ids differ in shape")
        x = (
            ag.embedding(self.p("embeddings.token"), token_ids)
            + ag.embedding(self.p("embeddings.position"), position_ids)
            + ag.embedding(self.p("embeddings.segment"), segment_ids)
        )
        x = ag.layer_norm(x, self.p("embeddings.norm.gain"), self.p("embeddings.norm.bias"))
        return ag.dropout(x, self.config.dropout, rng)

    def _attention(self, x, mask, layer, rng):
        c = self.config
        b, s, d = x.shape
        h, dh = c.heads, d // c.heads

        def heads(name):
            y = x @ self.p(f"layers.{layer}.attention.{name}.weight") + self.p(f"layers.{layer}.attention.{name}.bias")
            return y.reshape(b, s, h, dh).transpose(0, 2, 1, 3)

        q, k, v = heads("query"), heads("key"), heads("value")
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(dh))
        probs = ag.masked_softmax(scores, mask[:, None, :, :])
        ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(b, s, d)
        out = ctx @ self.p(f"layers.{layer}.attention.output.weight") + self.p(f"layers.{layer}.attention.output.bias")
        return ag.dropout(out, c.dropout, rng), probs.data

    def encode(self, embedded, mask, keep_attention=False, rng=None):
        """Run the layer stack under a boolean ``[batch, seq, seq]`` mask.

        ``mask[b, i, j]`` True means position i may attend to position j.
        ``rng`` enables dropout; without it the pass is deterministic.
        """
        x = embedded
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim == 2:
            mask = mask[None]
        if mask.shape != (x.shape[0], x.shape[1], x.shape[1]):
            raise ValueError(f"mask shape {mask.shape} does not match input {x.shape}")
        kept = []
        for i in range(self.config.layers):
            attn, probs = self._attention(x, mask, i, rng)
            if keep_attention:
                kept.append(probs)
            x = ag.layer_norm(x + attn, self.p(f"layers.{i}.attention.norm.gain"), self.p(f"layers.{i}.attention.norm.bias"))
            inner = ag.gelu(x @ self.p(f"layers.{i}.ffn.inner.weight") + self.p(f"layers.{i}.ffn.inner.bias"))
            outer = inner @ self.p(f"layers.{i}.ffn.outer.weight") + self.p(f"layers.{i}.ffn.outer.bias")
            x = ag.layer_norm(x + ag.dropout(outer, self.config.dropout, rng), self.p(f"layers.{i}.ffn.norm.gain"), self.p(f"layers.{i}.ffn.norm.bias"))
        attention = np.stack(kept, axis=1) if keep_attention else None
        return EncoderOutput(x, attention, mask)

    def __call__(self, token_ids, position_ids, segment_ids, mask, keep_attention=False, rng=None):
        return self.encode(self.embed(token_ids, position_ids, segment_ids, rng), mask, keep_attention, rng)


def dump_attention(output: EncoderOutput, query, batch_index=0):
    """Attention rows ``[layers, heads, seq]`` from one query position."""
    if output.attention is None:
        raise ValueError("attention weights were not retained; encode with keep_attention=True")
    seq = output.attention.shape[-1]
    if not 0 <= query < seq:
        raise IndexError(f"query position {query} out of range for length {seq}")
    return output.attention[batch_index, :, :, query, :]
