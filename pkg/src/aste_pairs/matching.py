"""Stage 2: classify every perceivable pair into POS / NEU / NEG / O."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Parameter
from .corpus import Triplet
from .encoder import Encoder, EncoderConfig
from .extraction import SpanSets
from .pairing import build_compound, build_pairs, pad_compounds

MATCH_LABELS = ("POS", "NEU", "NEG", "O")
NO_MATCH = MATCH_LABELS.index("O")


@dataclass
class PairPrediction:
    target: int
    opinion: int
    dist: np.ndarray

    @property
    def label(self):
        # argmax takes the first maximum, i.e. ties resolve POS < NEU < NEG < O
        return MATCH_LABELS[int(np.argmax(self.dist))]

    @property
    def probability(self):
        return float(self.dist.max())


def gold_grid(spans: SpanSets, triplets):
    """Label id per (target, opinion) index pair; O unless a gold triplet matches both spans."""
    polarity = {(t.target, t.opinion): t.polarity for t in triplets}
    return {
        (i, j): MATCH_LABELS.index(polarity.get((spans.targets[i], spans.opinions[j]), "O"))
        for i, j in build_pairs(spans)
    }


def pair_representation(hidden, batch_index, pair):
    """``[h_first; h_second]`` for the pair's two fusion positions."""
    seq = hidden.shape[1]
    a, b = pair.fusion
    if not (0 <= a < seq and 0 <= b < seq):
        raise IndexError(f"fusion slots {pair.fusion} out of range for length {seq}")
    return ag.concat([hidden[batch_index, a], hidden[batch_index, b]], axis=-1)


def matching_loss(dists, gold_labels):
    """Summed cross-entropy over a sentence's pair grid.

    ``dists`` is a ``[pairs, 4]`` Tensor and ``gold_labels`` the label ids in
    the same order.
    """
    onehot = np.zeros(dists.shape)
    onehot[np.arange(len(gold_labels)), np.asarray(gold_labels, dtype=np.int64)] = 1.0
    return ag.cross_entropy(dists, onehot)


def assemble_triplets(predictions, spans: SpanSets):
    """Triplets for every pair whose argmax is not O."""
    out = []
    for p in predictions:
        if p.label != "O":
            out.append(Triplet(spans.targets[p.target], spans.opinions[p.opinion], p.label))
    return out


class MatchingModel:
    stage = "match"

    def __init__(self, config: EncoderConfig, rng=None, ablation=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.config = config
        self.ablation = ablation
        self.encoder = Encoder(config, rng)
        self.params = dict(self.encoder.params)
        self.params["matcher.weight"] = Parameter(rng.normal(0.0, config.init_std, (2 * config.hidden, len(MATCH_LABELS))), "matcher.weight")
        self.params["matcher.bias"] = Parameter(np.zeros(len(MATCH_LABELS)), "matcher.bias")

    def match_logits(self, reps):
        """4-way distributions from ``[..., 2d]`` pair representations."""
        return ag.softmax(reps @ self.params["matcher.weight"] + self.params["matcher.bias"])

    def compounds(self, sentence_ids, spans, vocab, max_len=None):
        vocab_ids = (vocab.cls_id, vocab.sep_id, vocab.marker_ids)
        return build_compound(sentence_ids, spans, build_pairs(spans), max_len or self.config.max_len, vocab_ids, self.ablation)

    def forward(self, compounds, pad_id, rng=None, keep_attention=False):
        """Encode a batch of compound inputs and classify every pair in them.

        Returns the ``[total pairs, 4]`` distribution Tensor, the pair
        tables in the same order, and the encoder output.
        """
        tokens, positions, segments, mask = pad_compounds(compounds, pad_id)
        out = self.encoder(tokens, positions, segments, mask, keep_attention, rng)
        rows, cols, order = [], [], []
        for r, c in enumerate(compounds):
            for pair in c.pairs:
                rows.append(r)
                cols.append(pair.fusion)
                order.append(pair)
        if not order:
            return None, order, out
        rows = np.array(rows)
        cols = np.array(cols)
        reps = ag.concat([out.hidden[rows, cols[:, 0]], out.hidden[rows, cols[:, 1]]], axis=-1)
        return self.match_logits(reps), order, out

    def loss(self, batch, vocab, rng=None):
        """Mean over sentences of the summed pair-grid loss.

        ``batch`` is a list of ``(sentence ids, spans, triplets)``.
        """
        compounds, gold = [], []
        for ids, spans, triplets in batch:
            grid = gold_grid(spans, triplets)
            for c in self.compounds(ids, spans, vocab):
                compounds.append(c)
                gold.extend(grid[(p.target, p.opinion)] for p in c.pairs)
        dists, _, _ = self.forward(compounds, vocab.pad_id, rng)
        if dists is None:
            return None
        return matching_loss(dists, gold) * (1.0 / len(batch))

    def predict(self, sentence_ids, spans, vocab, max_len=None):
        """Pair predictions for one sentence, in target-major order."""
        if spans.m == 0 or spans.n == 0:
            return []
        compounds = self.compounds(sentence_ids, spans, vocab, max_len)
        dists, order, _ = self.forward(compounds, vocab.pad_id)
        return [PairPrediction(p.target, p.opinion, dists.data[k]) for k, p in enumerate(order)]
