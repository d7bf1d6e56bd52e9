"""Command-line front end for the bridge.

Four subcommands: extend-vocab, fine-tune, predict, export-embeddings.
Domain errors print one JSON line on stderr and exit 1.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .formats import BridgeError, read_injection_terms
from .finetune import FineTuneConfig, fine_tune
from .model import extend_vocabulary, load_base
from .predict import export_embeddings, predict_queries


def _quiet_transformers() -> None:
    from transformers.utils import logging as hf_logging
    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()


def cmd_extend_vocab(args) -> None:
    tokenizer, encoder = load_base(args.base_model)
    terms = read_injection_terms(args.terms)
    n_added = extend_vocabulary(tokenizer, encoder, terms, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    encoder.save_pretrained(out)
    tokenizer.save_pretrained(out)
    print(json.dumps({"added": n_added, "vocab_size": len(tokenizer)}))


def cmd_fine_tune(args) -> None:
    config = FineTuneConfig(
        base_model=args.base_model,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_seq_len=args.max_seq_len,
        injected_terms=args.injected_terms,
        scope=args.scope,
        seed=args.seed,
        sigmoid_normalize=args.sigmoid_normalize)
    out = fine_tune(args.training, config, args.out_dir)
    print(json.dumps({"checkpoint": str(out)}))


def cmd_predict(args) -> None:
    predict_queries(args.checkpoint, args.queries, args.out,
                    max_seq_len=args.max_seq_len)
    print(json.dumps({"predictions": args.out}))


def cmd_export_embeddings(args) -> None:
    export_embeddings(args.checkpoint, args.corpus, args.out,
                      max_seq_len=args.max_seq_len)
    print(json.dumps({"embeddings": args.out}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexbridge",
        description="Transformer fine-tuning bridge for the retrieval pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extend-vocab",
                       help="inject report terms into a base model")
    p.add_argument("--base-model", required=True)
    p.add_argument("--terms", required=True, help="injection-report JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extend_vocab)

    p = sub.add_parser("fine-tune", help="train a classifier checkpoint")
    p.add_argument("--training", required=True, help="training-set JSONL")
    p.add_argument("--base-model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", dest="learning_rate", type=float,
                   default=2e-5)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=256)
    p.add_argument("--max-seq-len", dest="max_seq_len", type=int, default=256)
    p.add_argument("--injected-terms", dest="injected_terms",
                   help="injection-report JSON")
    p.add_argument("--scope", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigmoid-normalize", dest="sigmoid_normalize",
                   action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_fine_tune)

    p = sub.add_parser("predict", help="score a query set into a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--queries", required=True, help="query-set JSONL")
    p.add_argument("--out", required=True, help="prediction CSV path")
    p.add_argument("--max-seq-len", dest="max_seq_len", type=int, default=256)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-embeddings",
                       help="pooled article vectors into a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True, help="normalized corpus JSON")
    p.add_argument("--out", required=True, help="embedding CSV path")
    p.add_argument("--max-seq-len", dest="max_seq_len", type=int, default=256)
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _quiet_transformers()
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (BridgeError, OSError) as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
