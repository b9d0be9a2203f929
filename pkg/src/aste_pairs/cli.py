"""Command line entry point: ``aste-pairs <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .checkpoint import Checkpoint
from .corpus import REFERENCE_STATS, SEPARATOR, AnnotatedSentence, dataset_stats, parse_line
from .pipeline import (
    RunConfig,
    dump_attention_case,
    evaluate,
    format_attention_case,
    predict,
    run_seeds,
    train_extraction,
    train_matching,
)


def _run_args(p):
    g = p.add_argument_group("run configuration")
    g.add_argument("--train")
    g.add_argument("--dev")
    g.add_argument("--test")
    g.add_argument("--hidden", type=int)
    g.add_argument("--layers", type=int)
    g.add_argument("--heads", type=int)
    g.add_argument("--ffn", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--extract-epochs", type=int)
    g.add_argument("--match-epochs", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--max-len", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--seeds", type=int, nargs="+")
    g.add_argument("--min-freq", type=int)
    g.add_argument("--ablation", choices=list("abcdef"))
    g.add_argument("--output-dir")
    g.add_argument("--reference", action="store_true", help="start from the published hyperparameters")


def _config(args):
    fields = RunConfig.__dataclass_fields__
    overrides = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    return RunConfig.reference(**overrides) if args.reference else RunConfig(**overrides)


def _sentence(text):
    return parse_line(text) if SEPARATOR in text else AnnotatedSentence(tuple(text.split()))


def cmd_stats(args):
    start = time.perf_counter()
    table = dataset_stats(args.data_dir)
    if not table:
        raise FileNotFoundError(f"no <dataset>/<split>_triplets.txt files under {args.data_dir}")
    mismatches = 0
    print("dataset\tsplit\tsentences\tPOS\tNEU\tNEG\treference")
    for name, splits in table.items():
        for split, stats in splits.items():
            ref = REFERENCE_STATS.get(name.lower(), {}).get(split)
            status = "-" if ref is None else ("match" if ref == stats.row() else f"MISMATCH {ref}")
            mismatches += ref is not None and ref != stats.row()
            print(f"{name}\t{split}\t" + "\t".join(map(str, stats.row())) + f"\t{status}")
    print(f"elapsed: {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return 1 if args.check and mismatches else 0


def cmd_train_extract(args):
    cfg = _config(args)
    ckpt = train_extraction(cfg)
    path = ckpt.save(Path(cfg.output_dir) / "extract")
    print(json.dumps({"checkpoint": str(path), **ckpt.metadata}))
    return 0


def cmd_train_match(args):
    cfg = _config(args)
    ckpt = train_matching(cfg, Checkpoint.load(args.extract))
    path = ckpt.save(Path(cfg.output_dir) / "match")
    print(json.dumps({"checkpoint": str(path), **ckpt.metadata}))
    return 0


def cmd_predict(args):
    results = predict(Checkpoint.load(args.extract), Checkpoint.load(args.match), args.input, args.output)
    skipped = sum(r is None for r in results)
    print(f"wrote {len(results)} records ({skipped} skipped) to {args.output}", file=sys.stderr)
    return 0


def cmd_evaluate(args):
    from .corpus import load_split

    test, _ = load_split(args.test)
    report = evaluate(Checkpoint.load(args.extract), Checkpoint.load(args.match), test, args.breakdown)
    print(report.to_jsonl() if args.json else report.to_text())
    return 0


def cmd_dump_attention(args):
    extraction = Checkpoint.load(args.extract) if args.extract else None
    case = dump_attention_case(Checkpoint.load(args.match), _sentence(args.sentence), args.pair, extraction=extraction)
    print(format_attention_case(case))
    return 0


def cmd_sweep(args):
    print(json.dumps(run_seeds(_config(args)), indent=1))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="aste-pairs", description="Two-stage aspect sentiment triplet extraction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="sentence and polarity counts per dataset split")
    p.add_argument("data_dir")
    p.add_argument("--check", action="store_true", help="exit nonzero if a known split differs from its published counts")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train-extract", help="train the span tagger")
    _run_args(p)
    p.set_defaults(func=cmd_train_extract)

    p = sub.add_parser("train-match", help="train the pair classifier")
    _run_args(p)
    p.add_argument("--extract", required=True, help="stage-1 checkpoint directory")
    p.set_defaults(func=cmd_train_match)

    p = sub.add_parser("predict", help="extract triplets from one sentence per line")
    p.add_argument("--extract", required=True)
    p.add_argument("--match", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score the pipeline on an annotated split")
    p.add_argument("--extract", required=True)
    p.add_argument("--match", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--breakdown", choices=["triplet-count", "one-to-many"])
    p.add_argument("--json", action="store_true", help="one JSON record per line instead of key: value text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dump-attention", help="attention of a target word vs its T-B marker")
    p.add_argument("--match", required=True)
    p.add_argument("--extract", help="used for spans when the sentence carries no annotation")
    p.add_argument("--sentence", required=True, help="plain or annotated sentence line")
    p.add_argument("--pair", type=int, required=True, help="0-based index in target-major pair order")
    p.set_defaults(func=cmd_dump_attention)

    p = sub.add_parser("sweep", help="train and score both stages for several seeds")
    _run_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, IndexError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
