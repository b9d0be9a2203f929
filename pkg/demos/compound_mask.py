"""
Packing every target-opinion pair into one pass
===============================================

"""
import numpy as np

from aste_pairs.corpus import Span, build_vocab, parse_line
from aste_pairs.encoder import EncoderConfig
from aste_pairs.extraction import SpanSets
from aste_pairs.matching import MatchingModel
from aste_pairs.pairing import build_compound, build_pairs

s = parse_line("Great food but the service was dreadful !####[([1], [0], 'POS'), ([4], [6], 'NEG')]")
vocab = build_vocab([s])
ids = [vocab[w] for w in s.tokens]
spans = SpanSets([Span(1, 1), Span(4, 4)], [Span(0, 0), Span(6, 6)])
vocab_ids = (vocab.cls_id, vocab.sep_id, vocab.marker_ids)

[c] = build_compound(ids, spans, build_pairs(spans), 64, vocab_ids)
print("tokens  ", [vocab.itos[k] for k in c.token_ids])
print("position", c.position_ids.tolist())
print("segment ", c.segment_ids.tolist())

# rows: who may look at whom (1 = visible)
for row in c.mask.astype(int):
    print("".join(map(str, row)))

# the joint pass gives the same pair distributions as one pass per pair
model = MatchingModel(EncoderConfig(len(vocab), hidden=16, heads=2, ffn=32, max_len=64, init_std=0.5),
                      np.random.default_rng(0))
joint, order, _ = model.forward([c], vocab.pad_id)
for k, p in enumerate(order):
    [solo] = build_compound(ids, spans, [(p.target, p.opinion)], 64, vocab_ids)
    alone, _, _ = model.forward([solo], vocab.pad_id)
    print(p.target, p.opinion, np.abs(joint.data[k] - alone.data[0]).max())

# with every position visible the pairs leak into each other
leaky = MatchingModel(model.config, np.random.default_rng(0), ablation="f")
[cf] = build_compound(ids, spans, build_pairs(spans), 64, vocab_ids, "f")
[sf] = build_compound(ids, spans, [(1, 1)], 64, vocab_ids, "f")
print("mode f gap", np.abs(leaky.forward([cf], vocab.pad_id)[0].data[3] - leaky.forward([sf], vocab.pad_id)[0].data[0]).max())
