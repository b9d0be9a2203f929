"""
Reading annotated sentences
===========================

"""
from importlib.resources import files

from aste_pairs.corpus import build_vocab, encode_tokens, load_split, parse_line

# one line: words, separator, then (target, opinion, polarity) index tuples
s = parse_line("Great food but the service was dreadful !####[([1], [0], 'POS'), ([4], [6], 'NEG')]")
for t in s.triplets:
    print(" ".join(s.tokens[t.target.start : t.target.end + 1]), "<-",
          " ".join(s.tokens[t.opinion.start : t.opinion.end + 1]), t.polarity)

# the bundled toy corpus
sentences, stats = load_split(files("aste_pairs") / "data" / "toy.txt")
print("sentences, POS, NEU, NEG:", stats.row())

vocab = build_vocab(sentences)
print(len(vocab), "vocabulary entries, first words", vocab.itos[8:14])
print(encode_tokens(s, vocab))
