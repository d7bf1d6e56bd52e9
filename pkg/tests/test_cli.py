import hashlib
import json
import shutil
import subprocess
import sys

import pytest

import corpusgen
from lexpipe.cli import main
from lexpipe.clustering import read_partition
from lexpipe.corpus import serialize_corpus

IDENTITY_HOOK = f"{sys.executable} -c \"import sys; sys.stdout.write(sys.stdin.read())\""


def write_corpus(corpus, path):
    path.write_text(json.dumps(serialize_corpus(corpus)), encoding="utf-8")
    return path


def read_manifest(out_dir, command):
    path = out_dir / f"{command}_manifest.json"
    return json.loads(path.read_text(encoding="utf-8"))


def snapshot(out_dir):
    return {p.name: p.read_bytes() for p in out_dir.iterdir() if p.is_file()}


def run_ok(argv):
    assert main(argv) == 0


def run_err(argv, capsys, error=None):
    assert main(argv) == 1
    err = capsys.readouterr().err.strip()
    payload = json.loads(err)
    assert set(payload) == {"error", "message"}
    if error:
        assert payload["error"] == error
    return payload


@pytest.fixture
def corpus_file(tmp_path, small_corpus):
    return write_corpus(small_corpus, tmp_path / "corpus.json")


@pytest.fixture
def disjoint_file(tmp_path, disjoint20):
    return write_corpus(disjoint20, tmp_path / "disjoint.json")


class TestIngestAndStats:
    def test_ingest_writes_normalized_corpus(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        run_ok(["ingest", "--corpus", str(corpus_file), "--out-dir", str(out)])
        data = json.loads((out / "corpus_normalized.json")
                          .read_text(encoding="utf-8"))
        assert [b["book"] for b in data["books"]] == [1]
        arts = data["books"][0]["articles"]
        assert [a["id"] for a in arts] == ["1", "2", "3", "3-bis"]
        assert all("sentences" in a for a in arts)

    def test_ingest_is_idempotent(self, tmp_path, corpus_file):
        first = tmp_path / "first"
        second = tmp_path / "second"
        run_ok(["ingest", "--corpus", str(corpus_file), "--out-dir", str(first)])
        run_ok(["ingest", "--corpus", str(first / "corpus_normalized.json"),
                "--out-dir", str(second)])
        assert (first / "corpus_normalized.json").read_bytes() == \
            (second / "corpus_normalized.json").read_bytes()

    def test_scope_selects_one_book(self, tmp_path):
        books = [
            corpusgen.single_chapter_book(
                1, [corpusgen.article("1", "uno", sentences=["frase uno"])]),
            corpusgen.single_chapter_book(
                2, [corpusgen.article("50", "due", sentences=["frase due"])]),
        ]
        path = write_corpus(corpusgen.build(books), tmp_path / "two.json")
        out = tmp_path / "out"
        run_ok(["ingest", "--corpus", str(path), "--scope", "book:2",
                "--out-dir", str(out)])
        data = json.loads((out / "corpus_normalized.json")
                          .read_text(encoding="utf-8"))
        assert [b["book"] for b in data["books"]] == [2]

    def test_bad_scope_is_json_error(self, tmp_path, corpus_file, capsys):
        payload = run_err(["ingest", "--corpus", str(corpus_file),
                           "--scope", "chapter:1",
                           "--out-dir", str(tmp_path / "out")],
                          capsys, error="CorpusError")
        assert "bad scope" in payload["message"]

    def test_stats_csv(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        run_ok(["stats", "--corpus", str(corpus_file), "--out-dir", str(out)])
        lines = (out / "stats.csv").read_text(encoding="utf-8").strip().split("\n")
        assert lines[0].startswith("portion,articles,sent_total")
        assert lines[1].startswith("book-1,4,")
        assert lines[2].startswith("all,4,")


class TestManifest:
    def test_contents_and_digests(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        run_ok(["ingest", "--corpus", str(corpus_file), "--out-dir", str(out)])
        manifest = read_manifest(out, "ingest")
        assert set(manifest) == {"command", "config", "config_sha256",
                                 "inputs", "outputs"}
        assert manifest["command"] == "ingest"
        assert manifest["config"]["corpus"] == str(corpus_file)
        expected = hashlib.sha256(
            json.dumps(manifest["config"], sort_keys=True).encode()).hexdigest()
        assert manifest["config_sha256"] == expected
        assert manifest["inputs"] == {
            str(corpus_file):
                hashlib.sha256(corpus_file.read_bytes()).hexdigest()}
        assert manifest["outputs"] == {
            "corpus_normalized.json": hashlib.sha256(
                (out / "corpus_normalized.json").read_bytes()).hexdigest()}

    def test_no_manifest_on_failure(self, tmp_path, capsys):
        out = tmp_path / "out"
        run_err(["ingest", "--corpus", str(tmp_path / "missing.json"),
                 "--out-dir", str(out)], capsys, error="CliError")
        assert not (out / "ingest_manifest.json").exists()


class TestConfigFile:
    def test_config_supplies_options(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "corpus": str(corpus_file), "scheme": "uni-rr", "min_tu": 8}),
            encoding="utf-8")
        run_ok(["make-training", "--config", str(config),
                "--out-dir", str(out)])
        assert (out / "book1_uni-rr_tu8.jsonl").is_file()

    def test_flags_override_config(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "corpus": str(corpus_file), "scheme": "uni-rr", "min_tu": 8}),
            encoding="utf-8")
        run_ok(["make-training", "--config", str(config),
                "--scheme", "title-rr", "--out-dir", str(out)])
        assert (out / "book1_title-rr_tu8.jsonl").is_file()
        manifest = read_manifest(out, "make-training")
        assert manifest["config"]["scheme"] == "title-rr"
        assert manifest["config"]["min_tu"] == 8

    def test_boolean_flag_overrides_config(self, tmp_path, corpus_file, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "corpus": str(corpus_file), "qtype": 1, "count": 5, "clip": True}),
            encoding="utf-8")
        out = tmp_path / "out"
        run_ok(["make-queries", "--config", str(config), "--out-dir", str(out)])
        payload = run_err(["make-queries", "--config", str(config), "--no-clip",
                           "--out-dir", str(out)], capsys, error="QueryGenError")
        assert "not enough sentences" in payload["message"]

    def test_non_object_config_rejected(self, tmp_path, corpus_file, capsys):
        config = tmp_path / "config.json"
        config.write_text("[1, 2]", encoding="utf-8")
        run_err(["ingest", "--corpus", str(corpus_file),
                 "--config", str(config), "--out-dir", str(tmp_path / "o")],
                capsys, error="CliError")

    def test_missing_required_option(self, tmp_path, corpus_file, capsys):
        payload = run_err(["vocab", "--corpus", str(corpus_file),
                           "--out-dir", str(tmp_path / "o")],
                          capsys, error="CliError")
        assert "--base-vocab" in payload["message"]


class TestVocabCommand:
    def test_report_and_extended_list(self, tmp_path, corpus_file):
        base = tmp_path / "base.txt"
        base.write_text("acquista\nnascita\n", encoding="utf-8")
        out = tmp_path / "out"
        run_ok(["vocab", "--corpus", str(corpus_file),
                "--base-vocab", str(base), "--df-ceiling", "0.6",
                "--out-dir", str(out)])
        report = json.loads((out / "injection_report.json")
                            .read_text(encoding="utf-8"))
        assert report["base_vocab_size"] == 2
        assert report["n_injected"] == len(report["terms"])
        assert report["final_vocab_size"] == 2 + report["n_injected"]
        assert "acquista" not in report["terms"]
        lines = (out / "extended_vocab.txt").read_text(encoding="utf-8") \
            .strip().split("\n")
        assert lines[:2] == ["acquista", "nascita"]
        assert lines[2:] == report["terms"]


class TestTrainingAndPrediction:
    def prepare(self, tmp_path, disjoint_file):
        steps = {n: tmp_path / n for n in
                 ("train", "model", "queries", "pred", "eval")}
        run_ok(["make-training", "--corpus", str(disjoint_file),
                "--scheme", "uni-rr-empht", "--min-tu", "32",
                "--out-dir", str(steps["train"])])
        training = steps["train"] / "book1_uni-rr-empht_tu32.jsonl"
        assert training.is_file()
        run_ok(["train-baseline", "--training", str(training),
                "--out-dir", str(steps["model"])])
        run_ok(["make-queries", "--qtype", "1", "--count", "1", "--seed", "3",
                "--corpus", str(disjoint_file),
                "--out-dir", str(steps["queries"])])
        queries = steps["queries"] / "queries_q1_book1.jsonl"
        assert queries.is_file()
        run_ok(["predict", "--model", str(steps["model"] / "model.json"),
                "--queries", str(queries), "--out-dir", str(steps["pred"])])
        return steps, queries

    def test_pipeline_to_perfect_metrics(self, tmp_path, disjoint_file):
        steps, queries = self.prepare(tmp_path, disjoint_file)
        run_ok(["eval-single",
                "--predictions", str(steps["pred"] / "predictions.csv"),
                "--queries", str(queries), "--ks", "3,10",
                "--label", "baseline-q1", "--out-dir", str(steps["eval"])])
        report = json.loads((steps["eval"] / "metrics_baseline-q1.json")
                            .read_text(encoding="utf-8"))
        m = report["metrics"]
        assert m["P"] == m["R"] == m["F_micro"] == m["F_macro"] == 1.0
        assert m["MRR"] == 1.0 and m["R@3"] == 1.0 and m["R@10"] == 1.0
        assert report["n_queries"] == 20 and report["n_classes"] == 20

    def test_load_predictions_canonicalizes(self, tmp_path, disjoint_file):
        steps, _ = self.prepare(tmp_path, disjoint_file)
        out = tmp_path / "canon"
        run_ok(["load-predictions",
                "--predictions", str(steps["pred"] / "predictions.csv"),
                "--out-dir", str(out)])
        assert (out / "predictions_canonical.csv").is_file()

    def test_multilabel_and_topic_and_report(self, tmp_path, disjoint_file):
        steps, queries = self.prepare(tmp_path, disjoint_file)
        part_dir = tmp_path / "part"
        run_ok(["icc-partition", "--corpus", str(disjoint_file),
                "--out-dir", str(part_dir)])
        partition = part_dir / "partition_divisions_book1.csv"
        assert set(read_partition(partition).values()) == {"c1"}

        ml_dir = tmp_path / "ml"
        run_ok(["eval-multilabel",
                "--predictions", str(steps["pred"] / "predictions.csv"),
                "--queries", str(queries), "--partition", str(partition),
                "--label", "article-side", "--out-dir", str(ml_dir)])
        ml = json.loads((ml_dir / "metrics_article-side.json")
                        .read_text(encoding="utf-8"))
        assert ml["metrics"]["F_micro"] == 1.0

        q6_dir = tmp_path / "q6"
        run_ok(["make-queries", "--qtype", "6", "--level", "chapter",
                "--corpus", str(disjoint_file), "--out-dir", str(q6_dir)])
        q6 = q6_dir / "queries_q6_chapter_book1.jsonl"
        pred6 = tmp_path / "pred6"
        run_ok(["predict", "--model", str(steps["model"] / "model.json"),
                "--queries", str(q6), "--out-dir", str(pred6)])
        topic_dir = tmp_path / "topic"
        run_ok(["eval-topic",
                "--predictions", str(pred6 / "predictions.csv"),
                "--queries", str(q6), "--ks", "3,10",
                "--label", "topic-side", "--out-dir", str(topic_dir)])
        topic = json.loads((topic_dir / "metrics_topic-side.json")
                           .read_text(encoding="utf-8"))
        assert topic["metrics"]["a_cs"] == 20.0
        assert topic["metrics"]["F_micro"] == 1.0

        rep_dir = tmp_path / "rep"
        run_ok(["report", "--inputs",
                str(ml_dir / "metrics_article-side.json"),
                str(topic_dir / "metrics_topic-side.json"),
                "--out-dir", str(rep_dir)])
        lines = (rep_dir / "summary.csv").read_text(encoding="utf-8") \
            .strip().split("\n")
        assert lines[0].startswith("run,P,R,F_micro,F_macro")
        assert lines[1].startswith("article-side,")
        assert lines[2].startswith("topic-side,")


class TestQueryCommands:
    def test_qtype2_writes_set_and_skip_report(self, tmp_path, corpus_file):
        q1_dir = tmp_path / "q1"
        run_ok(["make-queries", "--qtype", "1", "--count", "1",
                "--corpus", str(corpus_file), "--out-dir", str(q1_dir)])
        q2_dir = tmp_path / "q2"
        run_ok(["make-queries", "--qtype", "2",
                "--input", str(q1_dir / "queries_q1_book1.jsonl"),
                "--hook", IDENTITY_HOOK, "--out-dir", str(q2_dir)])
        lines = (q2_dir / "queries_q2.jsonl").read_text(encoding="utf-8") \
            .strip().split("\n")
        assert len(lines) == 4
        assert all(json.loads(ln)["unparaphrased"] for ln in lines)
        assert (q2_dir / "queries_q2_skipped.jsonl").read_text(
            encoding="utf-8") == ""

    def test_comments_and_cases(self, tmp_path, corpus_file):
        notes = tmp_path / "comments.jsonl"
        notes.write_text(json.dumps(
            {"article_id": "1", "text": "Commento. Altro commento."}) + "\n",
            encoding="utf-8")
        for qtype, name in ((3, "queries_q3.jsonl"), (4, "queries_q4.jsonl")):
            out = tmp_path / f"q{qtype}"
            run_ok(["make-queries", "--qtype", str(qtype),
                    "--comments", str(notes),
                    "--corpus", str(corpus_file), "--out-dir", str(out)])
            assert (out / name).is_file()
        cases = tmp_path / "cases.jsonl"
        cases.write_text(json.dumps(
            {"article_id": "2", "text": "Massima.", "year": 1999}) + "\n",
            encoding="utf-8")
        out = tmp_path / "q5"
        run_ok(["make-queries", "--qtype", "5", "--cases", str(cases),
                "--corpus", str(corpus_file), "--out-dir", str(out)])
        rec = json.loads((out / "queries_q5.jsonl")
                         .read_text(encoding="utf-8").strip())
        assert rec["year"] == 1999

    def test_bad_level_and_bad_qtype(self, tmp_path, corpus_file, capsys):
        payload = run_err(["make-queries", "--qtype", "6", "--level", "tome",
                           "--corpus", str(corpus_file),
                           "--out-dir", str(tmp_path / "o")],
                          capsys, error="CliError")
        assert "bad level" in payload["message"]
        run_err(["make-queries", "--qtype", "7", "--corpus", str(corpus_file),
                 "--out-dir", str(tmp_path / "o")], capsys, error="CliError")


class TestClusterCommands:
    def test_cluster_from_corpus(self, tmp_path, disjoint_file):
        out = tmp_path / "out"
        run_ok(["cluster", "--corpus", str(disjoint_file), "--seed", "0",
                "--out-dir", str(out)])
        mapping = read_partition(out / "partition_kmeans_k7.csv")
        assert len(mapping) == 20
        assert len(set(mapping.values())) == 7

    def test_cluster_from_embeddings(self, tmp_path):
        emb = tmp_path / "emb.csv"
        emb.write_text(
            "article_id,v0,v1\n1,1.0,0.0\n2,0.9,0.1\n3,0.0,1.0\n4,0.1,0.9\n",
            encoding="utf-8")
        out = tmp_path / "out"
        run_ok(["cluster", "--embeddings", str(emb), "--k", "2",
                "--out-dir", str(out)])
        mapping = read_partition(out / "partition_kmeans_k2.csv")
        assert mapping["1"] == mapping["2"]
        assert mapping["3"] == mapping["4"]
        assert mapping["1"] != mapping["3"]


class TestAttributesCommand:
    def test_schema_and_vectors(self, tmp_path, example_tree_corpus):
        path = write_corpus(example_tree_corpus, tmp_path / "tree.json")
        out = tmp_path / "out"
        run_ok(["attributes", "--corpus", str(path), "--book", "1",
                "--out-dir", str(out)])
        schema = json.loads((out / "attributes_book1.json")
                            .read_text(encoding="utf-8"))
        assert schema["n_attributes"] == 18
        lines = (out / "attribute_vectors_book1.csv") \
            .read_text(encoding="utf-8").strip().split("\n")
        assert lines[0] == "article_id," + ",".join(
            f"a{i}" for i in range(1, 19))
        assert len(lines) == 21


class TestDeterminism:
    def rerun_identical(self, argv, out):
        run_ok(argv)
        first = snapshot(out)
        run_ok(argv)
        assert snapshot(out) == first
        return first

    def test_repeat_runs_are_byte_identical(self, tmp_path, disjoint_file):
        out = tmp_path / "train"
        self.rerun_identical(
            ["make-training", "--corpus", str(disjoint_file),
             "--scheme", "triangle-rr", "--min-tu", "16",
             "--out-dir", str(out)], out)
        out = tmp_path / "queries"
        self.rerun_identical(
            ["make-queries", "--qtype", "1", "--rate", "0.5", "--seed", "11",
             "--corpus", str(disjoint_file), "--out-dir", str(out)], out)
        out = tmp_path / "cluster"
        self.rerun_identical(
            ["cluster", "--corpus", str(disjoint_file), "--seed", "5",
             "--k", "4", "--out-dir", str(out)], out)


class TestConsoleScript:
    def script(self):
        exe = shutil.which("lexpipe")
        if exe:
            return [exe]
        return [sys.executable, "-c",
                "import sys; from lexpipe.cli import main; "
                "sys.exit(main(sys.argv[1:]))"]

    def test_subprocess_roundtrip(self, tmp_path, corpus_file):
        out = tmp_path / "out"
        proc = subprocess.run(
            self.script() + ["ingest", "--corpus", str(corpus_file),
                             "--out-dir", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (out / "corpus_normalized.json").is_file()

    def test_subprocess_error_is_json(self, tmp_path):
        proc = subprocess.run(
            self.script() + ["ingest", "--corpus",
                             str(tmp_path / "nope.json"),
                             "--out-dir", str(tmp_path / "out")],
            capture_output=True, text=True)
        assert proc.returncode == 1
        payload = json.loads(proc.stderr.strip())
        assert payload["error"] == "CliError"
