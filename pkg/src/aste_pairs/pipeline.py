"""Training, prediction and evaluation of the two-stage pipeline."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .autograd import Adam
from .checkpoint import Checkpoint
from .corpus import AnnotatedSentence, Span, Triplet, build_vocab, encode_tokens, load_split, read_sentences
from .encoder import EncoderConfig, dump_attention
from .evaluation import breakdown_by_triplet_count, one_to_many_indices, score, span_report
from .extraction import ExtractionModel, SpanSets, encode_spans
from .matching import MatchingModel, assemble_triplets
from .pairing import check_ablation

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class RunConfig:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    ffn: int = 256
    dropout: float = 0.1
    extract_epochs: int = 30
    match_epochs: int = 60
    lr: float = 1e-3
    batch_size: int = 8
    max_len: int = 256
    seed: int = 1
    ablation: str | None = None
    min_freq: int = 1
    output_dir: str = "runs"
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])

    def __post_init__(self):
        check_ablation(self.ablation)

    @classmethod
    def reference(cls, **overrides):
        """Learning rate, batch size, length limit, epochs and seeds of the published setup."""
        base = dict(lr=5e-5, batch_size=8, max_len=256, extract_epochs=3, match_epochs=10, seeds=[1, 2, 3, 4, 5])
        base.update(overrides)
        return cls(**base)

    def encoder_config(self, vocab_size):
        return EncoderConfig(vocab_size, self.hidden, self.layers, self.heads, self.ffn, self.max_len, dropout=self.dropout)

    def to_dict(self):
        return asdict(self)


def _load(sentences, path):
    if sentences is not None:
        return list(sentences)
    if path is None:
        return []
    return load_split(path)[0]


def _batches(n, size, rng):
    order = rng.permutation(n)
    return [order[k : k + size] for k in range(0, n, size)]


def _snapshot(params):
    return {k: p.data.copy() for k, p in params.items()}


def _restore(params, snap):
    for k, p in params.items():
        p.data[...] = snap[k]


def _step(loss, optimizer, step):
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss {value} at step {step}")
    loss.backward()
    optimizer.step()
    return value


def extract_spans(checkpoint: Checkpoint, sentences, batch_size=32):
    """Stage-1 spans per sentence; None where the sentence is too long."""
    model, vocab = checkpoint.model, checkpoint.vocab
    vocab_ids = (vocab.cls_id, vocab.sep_id, vocab.pad_id)
    out = [None] * len(sentences)
    fits = [k for k, s in enumerate(sentences) if len(s) + 2 <= model.config.max_len]
    for k in range(0, len(fits), batch_size):
        idx = fits[k : k + batch_size]
        preds = model.predict([encode_tokens(sentences[i], vocab) for i in idx], vocab_ids)
        for i, (_, spans) in zip(idx, preds):
            out[i] = spans
    return out


def train_extraction(config: RunConfig, train=None, dev=None):
    train, dev = _load(train, config.train), _load(dev, config.dev)
    vocab = build_vocab(train, config.min_freq)
    model = ExtractionModel(config.encoder_config(len(vocab)), np.random.default_rng([config.seed, 1]))
    ckpt = Checkpoint(model, vocab, {"stage": "extract", "epoch": 0, "seed": config.seed})
    vocab_ids = (vocab.cls_id, vocab.sep_id, vocab.pad_id)

    examples = []
    for s in train:
        if len(s) + 2 > config.max_len:
            log.warning("skipping training sentence of %d words (max length %d)", len(s), config.max_len)
            continue
        examples.append((encode_tokens(s, vocab), encode_spans(SpanSets.from_sentence(s), len(s))))

    def dev_f1():
        if not dev:
            return None
        pred = extract_spans(ckpt, dev)
        keep = [k for k, p in enumerate(pred) if p is not None]
        return span_report([pred[k] for k in keep], [SpanSets.from_sentence(dev[k]) for k in keep]).f1

    best = dev_f1()
    best_epoch, snap = 0, _snapshot(model.params)
    shuffle = np.random.default_rng([config.seed, 2])
    drop = np.random.default_rng([config.seed, 3])
    optimizer = Adam(model.params, lr=config.lr)
    step = 0
    for epoch in range(1, config.extract_epochs + 1):
        total = 0.0
        for idx in _batches(len(examples), config.batch_size, shuffle):
            loss = model.loss([examples[i][0] for i in idx], [examples[i][1] for i in idx], vocab_ids, rng=drop)
            total += _step(loss, optimizer, step)
            step += 1
        metric = dev_f1()
        log.info("extract epoch %d loss %.4f dev span-F1 %s", epoch, total, metric)
        if metric is None or best is None or metric >= best:
            best, best_epoch, snap = metric, epoch, _snapshot(model.params)
    _restore(model.params, snap)
    ckpt.metadata.update(epoch=best_epoch, dev_span_f1=best)
    return ckpt


def pipeline_predict(extraction: Checkpoint, matching: Checkpoint, sentences, spans=None):
    """Triplets with probabilities per sentence, or None when a sentence was skipped."""
    if spans is None:
        spans = extract_spans(extraction, sentences)
    model, vocab = matching.model, matching.vocab
    results = []
    for sent, sp in zip(sentences, spans):
        if sp is None:
            results.append(None)
            continue
        try:
            preds = model.predict(encode_tokens(sent, vocab), sp, vocab)
        except ValueError:
            results.append(None)
            continue
        triplets = assemble_triplets(preds, sp)
        probs = [p.probability for p in preds if p.label != "O"]
        results.append(list(zip(triplets, probs)))
    return results


def _triplet_sets(results):
    return [set() if r is None else {t for t, _ in r} for r in results]


def train_matching(config: RunConfig, extraction: Checkpoint, train=None, dev=None):
    train, dev = _load(train, config.train), _load(dev, config.dev)
    vocab = extraction.vocab
    model = MatchingModel(config.encoder_config(len(vocab)), np.random.default_rng([config.seed, 4]), config.ablation)
    ckpt = Checkpoint(model, vocab, {"stage": "match", "epoch": 0, "seed": config.seed, "ablation": config.ablation})

    examples = []
    for s in train:
        spans = SpanSets.from_sentence(s)
        if spans.m == 0 or spans.n == 0:
            continue
        ids = encode_tokens(s, vocab)
        try:
            model.compounds(ids, spans, vocab)
        except ValueError:
            log.warning("skipping training sentence of %d words (max length %d)", len(s), config.max_len)
            continue
        examples.append((ids, spans, s.triplets))

    dev_spans = extract_spans(extraction, dev) if dev else None

    def dev_f1():
        if not dev:
            return None
        results = pipeline_predict(extraction, ckpt, dev, dev_spans)
        return score(_triplet_sets(results), [set(s.triplets) for s in dev]).f1

    best = dev_f1()
    best_epoch, snap = 0, _snapshot(model.params)
    shuffle = np.random.default_rng([config.seed, 5])
    drop = np.random.default_rng([config.seed, 6])
    optimizer = Adam(model.params, lr=config.lr)
    step = 0
    for epoch in range(1, config.match_epochs + 1):
        total = 0.0
        for idx in _batches(len(examples), config.batch_size, shuffle):
            loss = model.loss([examples[i] for i in idx], vocab, rng=drop)
            total += _step(loss, optimizer, step)
            step += 1
        metric = dev_f1()
        log.info("match epoch %d loss %.4f dev triplet-F1 %s", epoch, total, metric)
        if metric is None or best is None or metric >= best:
            best, best_epoch, snap = metric, epoch, _snapshot(model.params)
    _restore(model.params, snap)
    ckpt.metadata.update(epoch=best_epoch, dev_triplet_f1=best)
    return ckpt


def write_predictions(results, sentences, path):
    with open(path, "w", encoding="utf-8") as f:
        for k, (sent, res) in enumerate(zip(sentences, results)):
            record = {"index": k, "tokens": list(sent.tokens), "skipped": res is None, "triplets": []}
            for t, prob in res or ():
                record["triplets"].append(
                    {"target": list(t.target), "opinion": list(t.opinion), "polarity": t.polarity, "probability": prob}
                )
            f.write(json.dumps(record) + "\n")


def read_predictions(path):
    """Per-sentence triplet sets from a predictions file."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append({Triplet(Span(*t["target"]), Span(*t["opinion"]), t["polarity"]) for t in rec["triplets"]})
    return out


def predict(extraction: Checkpoint, matching: Checkpoint, input_path, output_path):
    sentences = read_sentences(input_path)
    results = pipeline_predict(extraction, matching, sentences)
    write_predictions(results, sentences, output_path)
    return results


def evaluate(extraction: Checkpoint, matching: Checkpoint, test, breakdown=None):
    """End-to-end report; ``breakdown`` is None, "triplet-count" or "one-to-many"."""
    gold = [set(s.triplets) for s in test]
    pred = _triplet_sets(pipeline_predict(extraction, matching, test))
    return evaluate_sets(pred, gold, breakdown)


def evaluate_sets(pred, gold, breakdown=None):
    if breakdown is None:
        return score(pred, gold)
    if breakdown == "triplet-count":
        return breakdown_by_triplet_count(gold, pred)
    if breakdown == "one-to-many":
        report = score(pred, gold)
        idx = one_to_many_indices(gold)
        report.buckets = [score([pred[k] for k in idx], [gold[k] for k in idx], label="one-to-many")]
        return report
    raise ValueError(f"unknown breakdown {breakdown!r}")


def dump_attention_case(matching: Checkpoint, sentence: AnnotatedSentence, pair_index, spans=None, extraction=None):
    """Attention rows of a pair's target word and of its T-B marker, per layer and head.

    Spans come from ``spans``, else from the sentence's gold triplets, else
    from stage-1 ``extraction``.
    """
    model, vocab = matching.model, matching.vocab
    if spans is None:
        if sentence.triplets:
            spans = SpanSets.from_sentence(sentence)
        elif extraction is not None:
            spans = extract_spans(extraction, [sentence])[0]
        else:
            raise ValueError("no spans available for the sentence")
    compounds = model.compounds(encode_tokens(sentence, vocab), spans, vocab)
    located = [(c, p) for c in compounds for p in c.pairs]
    if not 0 <= pair_index < len(located):
        raise IndexError(f"pair index {pair_index} out of range ({len(located)} pairs)")
    compound, pair = located[pair_index]
    if "T-B" not in pair.slots:
        raise ValueError("the checkpoint's ablation mode has no T-B markers")
    out = model.encoder(compound.token_ids, compound.position_ids, compound.segment_ids, compound.mask, keep_attention=True)
    word_row = spans.targets[pair.target].start + 1
    marker_row = pair.slots["T-B"]
    labels = []
    slot_owner = {q: (p, kind) for p in compound.pairs for kind, q in p.slots.items()}
    for q in range(len(compound)):
        if compound.word_index[q] >= 0:
            labels.append(sentence.tokens[compound.word_index[q]])
        elif q == 0:
            labels.append("[CLS]")
        elif q in slot_owner:
            p, kind = slot_owner[q]
            labels.append(f"{kind}:{p.target},{p.opinion}")
        else:
            labels.append("[SEP]")
    return {
        "columns": labels,
        "pair": (pair.target, pair.opinion),
        "word_row": word_row,
        "marker_row": marker_row,
        "word": dump_attention(out, word_row),
        "marker": dump_attention(out, marker_row),
    }


def format_attention_case(case):
    lines = ["\t".join(["layer", "head", "row", *case["columns"]])]
    layers, heads, _ = case["word"].shape
    for layer in range(layers):
        for head in range(heads):
            for name in ("word", "marker"):
                weights = "\t".join(f"{w:.4f}" for w in case[name][layer, head])
                lines.append(f"{layer}\t{head}\t{name}\t{weights}")
    return "\n".join(lines)


def run_seeds(config: RunConfig, train=None, dev=None, test=None, seeds=None):
    """Train both stages once per seed; report per-seed metrics and the best-dev seed."""
    train, dev, test = _load(train, config.train), _load(dev, config.dev), _load(test, config.test)
    rows = []
    for seed in seeds or config.seeds:
        cfg = replace(config, seed=seed)
        ext = train_extraction(cfg, train, dev)
        mat = train_matching(cfg, ext, train, dev)
        test_f1 = evaluate(ext, mat, test).f1 if test else None
        rows.append({"seed": seed, "dev_f1": mat.metadata.get("dev_triplet_f1"), "test_f1": test_f1})
    ranked = [r for r in rows if r["dev_f1"] is not None]
    best = max(ranked, key=lambda r: r["dev_f1"]) if ranked else None
    return {"runs": rows, "best": best}


def save_run(path, extraction=None, matching=None):
    path = Path(path)
    if extraction is not None:
        extraction.save(path / "extract")
    if matching is not None:
        matching.save(path / "match")
    return path


__all__ = [
    "RunConfig",
    "TrainingError",
    "train_extraction",
    "train_matching",
    "pipeline_predict",
    "predict",
    "evaluate",
    "evaluate_sets",
    "dump_attention_case",
    "format_attention_case",
    "run_seeds",
    "extract_spans",
]
