"""
Training both stages on the toy corpus
======================================

Takes about ten seconds on a laptop CPU.
"""
from importlib.resources import files

from aste_pairs.corpus import AnnotatedSentence, load_split
from aste_pairs.pipeline import RunConfig, dump_attention_case, evaluate, pipeline_predict, train_extraction, train_matching

toy, _ = load_split(files("aste_pairs") / "data" / "toy.txt")
cfg = RunConfig(extract_epochs=40, match_epochs=60, seed=1)

ext = train_extraction(cfg, toy, toy)  # span tagger
mat = train_matching(cfg, ext, toy, toy)  # pair classifier
print("dev span F1", ext.metadata["dev_span_f1"], "dev triplet F1", mat.metadata["dev_triplet_f1"])

plain = AnnotatedSentence(tuple("Great food but the service was dreadful !".split()))
for t, prob in pipeline_predict(ext, mat, [plain])[0]:
    print(t, round(prob, 3))

# one opinion shared by two targets of opposite polarity
print(toy[1].tokens, pipeline_predict(ext, mat, [toy[1]])[0])

print(evaluate(ext, mat, toy, "triplet-count").to_text())

# T-B marker of (service, dreadful) vs the plain word "service"
case = dump_attention_case(mat, toy[0], 3)
cols = case["columns"]
for name in ("word", "marker"):
    w = case[name].mean(axis=(0, 1))
    print(name, "dreadful %.3f  Great %.3f" % (w[cols.index("dreadful")], w[cols.index("Great")]))
