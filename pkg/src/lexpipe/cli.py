"""Command-line front end.

Every subcommand reads JSON/JSONL/CSV artifacts, writes its outputs
atomically (temp file + rename) into --out-dir, and leaves a manifest
recording the effective config, the seed, and SHA-256 digests of all inputs
and outputs.  Options may come from a JSON config file (--config); explicit
flags win.  Invalid inputs exit nonzero with a one-line JSON error on
stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import attributes as attr_mod
from . import baseline as base_mod
from . import clustering as clus_mod
from . import corpus as corpus_mod
from . import labeling as label_mod
from . import metrics as metrics_mod
from . import querygen as query_mod
from . import vocab as vocab_mod


class CliError(ValueError):
    """Raised for bad command lines or config files."""


_DOMAIN_ERRORS = (
    CliError,
    corpus_mod.CorpusError,
    vocab_mod.VocabError,
    label_mod.LabelingError,
    query_mod.QueryGenError,
    base_mod.BaselineError,
    base_mod.PredictionError,
    clus_mod.ClusteringError,
    attr_mod.AttributeError_,
    metrics_mod.MetricError,
    OSError,
    json.JSONDecodeError,
)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Runner:
    """Collects inputs/outputs of one subcommand run and writes the manifest."""

    def __init__(self, command: str, out_dir: Path, config: Dict):
        self.command = command
        self.out_dir = out_dir
        self.config = config
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def track_input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise CliError(f"input file not found: {path}")
        self.inputs[str(path)] = _sha256_file(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        final = self.out_dir / name
        tmp = final.with_name(final.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, final)
        self.outputs[name] = _sha256_file(final)
        return final

    def write_with(self, name: str, writer) -> Path:
        """Run writer(tmp_path), then move the temp file into place."""
        final = self.out_dir / name
        tmp = final.with_name(final.name + ".tmp")
        writer(tmp)
        os.replace(tmp, final)
        self.outputs[name] = _sha256_file(final)
        return final

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_sha256": _sha256_text(
                json.dumps(self.config, sort_keys=True)),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        final = self.out_dir / f"{self.command}_manifest.json"
        tmp = final.with_name(final.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, final)


class Options:
    """Effective options: explicit flags override the config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file_config: Dict = {}
        config_path = self.args.get("config")
        if config_path:
            with open(config_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            if not isinstance(data, dict):
                raise CliError(f"config file {config_path} must be a JSON object")
            self.file_config = data
        self.resolved: Dict = {}

    def get(self, key: str, default=None, required: bool = False):
        value = self.args.get(key)
        if value is None:
            value = self.file_config.get(key)
        if value is None:
            value = default
        if value is None and required:
            raise CliError(f"missing required option --{key.replace('_', '-')}")
        self.resolved[key] = value
        return value


def _parse_ks(raw) -> List[int]:
    if isinstance(raw, (list, tuple)):
        return [int(k) for k in raw]
    try:
        return [int(part) for part in str(raw).split(",") if part.strip()]
    except ValueError:
        raise CliError(f"bad k list {raw!r}: expected e.g. '3,10'") from None


def _safe_label(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in label)


def _load_scoped_corpus(opts: Options, runner: Runner) -> corpus_mod.Corpus:
    path = runner.track_input(opts.get("corpus", required=True))
    corpus = corpus_mod.load_corpus(path)
    scope = opts.get("scope", "all")
    return corpus.scoped(scope)


def cmd_ingest(opts: Options, runner: Runner) -> None:
    corpus = _load_scoped_corpus(opts, runner)
    data = corpus_mod.serialize_corpus(corpus)
    runner.write_text("corpus_normalized.json",
                      json.dumps(data, indent=2) + "\n")


def cmd_stats(opts: Options, runner: Runner) -> None:
    corpus = _load_scoped_corpus(opts, runner)
    rows = corpus_mod.corpus_stats(corpus)
    runner.write_text("stats.csv", corpus_mod.stats_to_csv(rows))


def cmd_vocab(opts: Options, runner: Runner) -> None:
    corpus = _load_scoped_corpus(opts, runner)
    base_path = runner.track_input(opts.get("base_vocab", required=True))
    base = vocab_mod.load_wordlist(base_path)
    stop_path = opts.get("stopwords")
    if stop_path:
        stop = vocab_mod.load_wordlist(runner.track_input(stop_path))
    else:
        stop = vocab_mod.default_stopwords()
    ceiling = float(opts.get("df_ceiling", 0.5))
    report = vocab_mod.select_injection_terms(corpus, base, stop, ceiling)
    runner.write_text("injection_report.json",
                      json.dumps(report.to_dict(), indent=2) + "\n")
    runner.write_text("extended_vocab.txt",
                      "\n".join(vocab_mod.extended_vocab(base, report)) + "\n")


def cmd_make_training(opts: Options, runner: Runner) -> None:
    corpus = _load_scoped_corpus(opts, runner)
    config = label_mod.LabelingConfig(
        scheme=opts.get("scheme", required=True),
        min_tu=int(opts.get("min_tu", 32)),
        multiplier=int(opts.get("multiplier", 4)),
        mean_sentences=int(opts.get("mean_sentences", 4)))
    name = label_mod.training_filename(corpus.scope_tag, config.scheme,
                                       config.min_tu)
    units = label_mod.generate_training_set(corpus, config)
    runner.write_with(name, lambda tmp: label_mod.write_training_set(units, tmp))


def cmd_make_queries(opts: Options, runner: Runner) -> None:
    qtype = int(opts.get("qtype", required=True))
    if qtype == 1:
        corpus = _load_scoped_corpus(opts, runner)
        count = opts.get("count")
        rate = opts.get("rate")
        queries = query_mod.gen_qtype1(
            corpus,
            count=int(count) if count is not None else None,
            rate=float(rate) if rate is not None else None,
            seed=int(opts.get("seed", 0)),
            clip=bool(opts.get("clip", False)))
        name = f"queries_q1_{corpus_mod.scope_file_tag(corpus.scope_tag)}.jsonl"
        runner.write_with(name, lambda tmp: query_mod.write_queries(queries, tmp))
    elif qtype == 2:
        source = query_mod.read_queries(
            runner.track_input(opts.get("input", required=True)))
        hook = opts.get("hook", required=True)
        timeout = opts.get("timeout")
        queries, skipped = query_mod.gen_qtype2(
            source, hook,
            max_workers=int(opts.get("max_workers", 4)),
            timeout=float(timeout) if timeout is not None else None)
        runner.write_with("queries_q2.jsonl",
                          lambda tmp: query_mod.write_queries(queries, tmp))
        runner.write_with("queries_q2_skipped.jsonl",
                          lambda tmp: query_mod.write_skip_report(skipped, tmp))
    elif qtype in (3, 4):
        corpus = _load_scoped_corpus(opts, runner)
        path = runner.track_input(opts.get("comments", required=True))
        q3, q4 = query_mod.ingest_comments(path, corpus)
        queries = q3 if qtype == 3 else q4
        runner.write_with(f"queries_q{qtype}.jsonl",
                          lambda tmp: query_mod.write_queries(queries, tmp))
    elif qtype == 5:
        corpus = _load_scoped_corpus(opts, runner)
        path = runner.track_input(opts.get("cases", required=True))
        queries = query_mod.ingest_cases(path, corpus)
        runner.write_with("queries_q5.jsonl",
                          lambda tmp: query_mod.write_queries(queries, tmp))
    elif qtype == 6:
        corpus = _load_scoped_corpus(opts, runner)
        level = opts.get("level", required=True)
        if level not in corpus_mod.DIVISION_LEVELS:
            raise CliError(f"bad level {level!r}: expected one of "
                           f"{', '.join(corpus_mod.DIVISION_LEVELS)}")
        queries = query_mod.gen_qtype6(corpus, level)
        name = (f"queries_q6_{level}_"
                f"{corpus_mod.scope_file_tag(corpus.scope_tag)}.jsonl")
        runner.write_with(name, lambda tmp: query_mod.write_queries(queries, tmp))
    else:
        raise CliError(f"bad qtype {qtype}: expected 1..6")


def cmd_train_baseline(opts: Options, runner: Runner) -> None:
    units = label_mod.read_training_set(
        runner.track_input(opts.get("training", required=True)))
    model = base_mod.train_baseline(units)
    runner.write_with("model.json", lambda tmp: base_mod.save_model(model, tmp))


def cmd_predict(opts: Options, runner: Runner) -> None:
    model = base_mod.load_model(
        runner.track_input(opts.get("model", required=True)))
    queries = query_mod.read_queries(
        runner.track_input(opts.get("queries", required=True)))
    pm = base_mod.predict_set(model, queries)
    runner.write_with("predictions.csv",
                      lambda tmp: base_mod.write_predictions(pm, tmp))


def cmd_load_predictions(opts: Options, runner: Runner) -> None:
    pm = base_mod.load_predictions(
        runner.track_input(opts.get("predictions", required=True)))
    runner.write_with("predictions_canonical.csv",
                      lambda tmp: base_mod.write_predictions(pm, tmp))


def cmd_cluster(opts: Options, runner: Runner) -> None:
    embeddings = opts.get("embeddings")
    if embeddings:
        ids, matrix = clus_mod.load_embeddings(runner.track_input(embeddings))
    else:
        corpus = _load_scoped_corpus(opts, runner)
        ids, matrix = clus_mod.tfidf_article_vectors(corpus)
    k_opt = opts.get("k")
    if k_opt is not None:
        k = int(k_opt)
    else:
        k = clus_mod.choose_k(len(ids), int(opts.get("target_mean_size", 3)))
    result = clus_mod.bisecting_spherical_kmeans(
        matrix, k, seed=int(opts.get("seed", 0)))
    mapping = {aid: label for aid, label in zip(ids, result.labels)}
    runner.write_with(f"partition_kmeans_k{k}.csv",
                      lambda tmp: clus_mod.write_partition(mapping, tmp))


def cmd_icc_partition(opts: Options, runner: Runner) -> None:
    corpus = _load_scoped_corpus(opts, runner)
    mapping = clus_mod.icc_partition(corpus)
    name = f"partition_divisions_{corpus_mod.scope_file_tag(corpus.scope_tag)}.csv"
    runner.write_with(name, lambda tmp: clus_mod.write_partition(mapping, tmp))


def cmd_attributes(opts: Options, runner: Runner) -> None:
    corpus = corpus_mod.load_corpus(
        runner.track_input(opts.get("corpus", required=True)))
    book = int(opts.get("book", required=True))
    schema = attr_mod.build_attribute_schema(corpus, book)
    rows = attr_mod.attribute_vectors(schema, corpus)
    runner.write_with(f"attributes_book{book}.json",
                      lambda tmp: attr_mod.write_schema(schema, tmp))
    runner.write_with(f"attribute_vectors_book{book}.csv",
                      lambda tmp: attr_mod.write_vectors(rows, schema.size, tmp))


def _eval_common(opts: Options, runner: Runner):
    pm = base_mod.load_predictions(
        runner.track_input(opts.get("predictions", required=True)))
    queries = query_mod.read_queries(
        runner.track_input(opts.get("queries", required=True)))
    return pm, queries


def cmd_eval_single(opts: Options, runner: Runner) -> None:
    pm, queries = _eval_common(opts, runner)
    ks = _parse_ks(opts.get("ks", "3,10"))
    label = opts.get("label", "single-label")
    report = metrics_mod.evaluate_single(
        pm, queries, ks=ks,
        include_unqueried_recall=bool(opts.get("include_unqueried_recall", False)),
        label=label)
    runner.write_with(f"metrics_{_safe_label(label)}.json",
                      lambda tmp: metrics_mod.write_report(report, tmp))


def cmd_eval_multilabel(opts: Options, runner: Runner) -> None:
    pm, queries = _eval_common(opts, runner)
    partition = clus_mod.read_partition(
        runner.track_input(opts.get("partition", required=True)))
    label = opts.get("label", "article-driven")
    report = metrics_mod.multilabel_article_driven(pm, queries, partition,
                                                   label=label)
    runner.write_with(f"metrics_{_safe_label(label)}.json",
                      lambda tmp: metrics_mod.write_report(report, tmp))


def cmd_eval_topic(opts: Options, runner: Runner) -> None:
    pm, queries = _eval_common(opts, runner)
    ks = _parse_ks(opts.get("ks", "3,10"))
    label = opts.get("label", "topic-driven")
    report = metrics_mod.multilabel_topic_driven(pm, queries, ks=ks, label=label)
    runner.write_with(f"metrics_{_safe_label(label)}.json",
                      lambda tmp: metrics_mod.write_report(report, tmp))


def cmd_report(opts: Options, runner: Runner) -> None:
    paths = opts.get("inputs", required=True)
    if isinstance(paths, str):
        paths = [p for p in paths.split(",") if p]
    reports = [metrics_mod.read_report(runner.track_input(p)) for p in paths]
    runner.write_text("summary.csv", metrics_mod.summary_table(reports))


_COMMANDS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "vocab": cmd_vocab,
    "make-training": cmd_make_training,
    "make-queries": cmd_make_queries,
    "train-baseline": cmd_train_baseline,
    "predict": cmd_predict,
    "load-predictions": cmd_load_predictions,
    "cluster": cmd_cluster,
    "icc-partition": cmd_icc_partition,
    "attributes": cmd_attributes,
    "eval-single": cmd_eval_single,
    "eval-multilabel": cmd_eval_multilabel,
    "eval-topic": cmd_eval_topic,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexpipe",
        description="Statute corpus preparation, training-set generation, "
                    "baseline retrieval and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, **kwargs) -> argparse.ArgumentParser:
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out-dir", dest="out_dir",
                       help="output directory (default .)")
        return p

    p = add("ingest", help="normalize and validate a corpus file")
    p.add_argument("--corpus")
    p.add_argument("--scope")

    p = add("stats", help="per-book sentence/word statistics CSV")
    p.add_argument("--corpus")
    p.add_argument("--scope")

    p = add("vocab", help="select domain terms missing from a base vocabulary")
    p.add_argument("--corpus")
    p.add_argument("--scope")
    p.add_argument("--base-vocab", dest="base_vocab")
    p.add_argument("--stopwords")
    p.add_argument("--df-ceiling", dest="df_ceiling", type=float)

    p = add("make-training", help="generate a labeling scheme's training set")
    p.add_argument("--corpus")
    p.add_argument("--scope")
    p.add_argument("--scheme", choices=list(label_mod.SCHEMES))
    p.add_argument("--min-tu", dest="min_tu", type=int)
    p.add_argument("--multiplier", type=int)
    p.add_argument("--mean-sentences", dest="mean_sentences", type=int)

    p = add("make-queries", help="build a query set (types 1-6)")
    p.add_argument("--qtype", type=int)
    p.add_argument("--corpus")
    p.add_argument("--scope")
    p.add_argument("--count", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--clip", action=argparse.BooleanOptionalAction)
    p.add_argument("--seed", type=int)
    p.add_argument("--input", help="qtype 2: query set to paraphrase")
    p.add_argument("--hook", help="qtype 2: paraphrase command (stdin->stdout)")
    p.add_argument("--max-workers", dest="max_workers", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--comments", help="qtypes 3/4: annotation JSONL")
    p.add_argument("--cases", help="qtype 5: case-law JSONL")
    p.add_argument("--level", help="qtype 6: division level")

    p = add("train-baseline", help="fit the TF-IDF centroid classifier")
    p.add_argument("--training")

    p = add("predict", help="score a query set with a trained model")
    p.add_argument("--model")
    p.add_argument("--queries")

    p = add("load-predictions", help="validate and canonicalize a prediction CSV")
    p.add_argument("--predictions")

    p = add("cluster", help="bisecting spherical k-means partition")
    p.add_argument("--corpus")
    p.add_argument("--scope")
    p.add_argument("--embeddings", help="cluster these vectors instead of TF-IDF")
    p.add_argument("--k", type=int)
    p.add_argument("--target-mean-size", dest="target_mean_size", type=int)
    p.add_argument("--seed", type=int)

    p = add("icc-partition", help="partition articles by terminal division")
    p.add_argument("--corpus")
    p.add_argument("--scope")

    p = add("attributes", help="division-heading attribute schema and vectors")
    p.add_argument("--corpus")
    p.add_argument("--book", type=int)

    p = add("eval-single", help="single-label metrics for a prediction matrix")
    p.add_argument("--predictions")
    p.add_argument("--queries")
    p.add_argument("--ks")
    p.add_argument("--include-unqueried-recall", dest="include_unqueried_recall",
                   action=argparse.BooleanOptionalAction)
    p.add_argument("--label")

    p = add("eval-multilabel", help="article-driven multi-label metrics")
    p.add_argument("--predictions")
    p.add_argument("--queries")
    p.add_argument("--partition")
    p.add_argument("--label")

    p = add("eval-topic", help="topic-driven multi-label metrics")
    p.add_argument("--predictions")
    p.add_argument("--queries")
    p.add_argument("--ks")
    p.add_argument("--label")

    p = add("report", help="join metric reports into a summary CSV")
    p.add_argument("--inputs", nargs="+")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = Options(args)
        out_dir = Path(opts.get("out_dir", "."))
        runner = Runner(args.command, out_dir, opts.resolved)
        _COMMANDS[args.command](opts, runner)
        runner.finish()
    except _DOMAIN_ERRORS as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
