"""Exact-match triplet scoring and breakdowns by sentence complexity."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field


@dataclass
class EvalReport:
    tp: int
    predicted: int
    gold: int
    label: str = "all"
    buckets: list["EvalReport"] = field(default_factory=list)

    @property
    def precision(self):
        return self.tp / self.predicted if self.predicted else 0.0

    @property
    def recall(self):
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def record(self):
        return {
            "label": self.label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "predicted": self.predicted,
            "gold": self.gold,
        }

    def to_text(self):
        lines = []
        for rep in (self, *self.buckets):
            prefix = "" if rep is self else f"{rep.label}."
            for key, value in rep.record().items():
                if key == "label":
                    continue
                value = f"{value:.6f}" if isinstance(value, float) else value
                lines.append(f"{prefix}{key}: {value}")
        return "\n".join(lines)

    def to_records(self):
        return [self.record()] + [b.record() for b in self.buckets]

    def to_jsonl(self):
        return "\n".join(json.dumps(r) for r in self.to_records())


def score(predictions, gold, label="all"):
    """Micro precision / recall / F1 over aligned per-sentence triplet collections."""
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} prediction sets for {len(gold)} gold sentences")
    tp = n_pred = n_gold = 0
    for pred, ref in zip(predictions, gold):
        pred, ref = set(pred), set(ref)
        tp += len(pred & ref)
        n_pred += len(pred)
        n_gold += len(ref)
    return EvalReport(tp, n_pred, n_gold, label)


def _bucket_name(count, bounds):
    top = bounds[-1]
    if count >= top:
        return f">={top}"
    return str(count)


def breakdown_by_triplet_count(gold, predictions, bounds=(1, 2, 3, 4)):
    """Global report with one sub-report per gold triplet count.

    The last bound is open ended. Sentences with fewer gold triplets than
    the first bound (typically none) get their own bucket so the buckets
    always partition the corpus.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} prediction sets for {len(gold)} gold sentences")
    groups = {}
    for pred, ref in zip(predictions, gold):
        name = _bucket_name(len(set(ref)), bounds)
        groups.setdefault(name, ([], []))
        groups[name][0].append(pred)
        groups[name][1].append(ref)

    def key(name):
        return int(name.lstrip(">="))

    report = score(predictions, gold)
    report.buckets = [score(p, g, label=f"triplets={name}") for name, (p, g) in sorted(groups.items(), key=lambda kv: key(kv[0]))]
    return report


def one_to_many_indices(gold):
    """Indices of sentences where a target or opinion span occurs in two or more triplets."""
    keep = []
    for k, triplets in enumerate(gold):
        triplets = set(triplets)
        targets = Counter(t.target for t in triplets)
        opinions = Counter(t.opinion for t in triplets)
        if any(c >= 2 for c in targets.values()) or any(c >= 2 for c in opinions.values()):
            keep.append(k)
    return keep


def one_to_many_subset(gold, predictions=None):
    idx = one_to_many_indices(gold)
    subset = [gold[k] for k in idx]
    if predictions is None:
        return subset
    return subset, [predictions[k] for k in idx]


def span_report(predicted_spans, gold_spans):
    """Micro F1 over (kind, span) items; used for stage-1 model selection."""
    preds = [{("T", s) for s in p.targets} | {("O", s) for s in p.opinions} for p in predicted_spans]
    refs = [{("T", s) for s in g.targets} | {("O", s) for s in g.opinions} for g in gold_spans]
    return score(preds, refs, label="spans")
