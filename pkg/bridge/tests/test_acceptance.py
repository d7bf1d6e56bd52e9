"""End-to-end check against the evaluation pipeline's command line.

Builds a 5-article toy corpus, asks the pipeline to normalize it and to
emit a training set, an injection report and a query set, fine-tunes for
one epoch, and feeds the resulting CSVs back through the pipeline's own
validation and clustering commands.  Everything crosses the package
boundary as files.
"""

import csv
import json
import shutil
import subprocess
import sys

import pytest

from lexbridge.finetune import FineTuneConfig, fine_tune
from lexbridge.model import load_classifier
from lexbridge.predict import export_embeddings, predict_queries

RAW_ARTICLES = [
    ("1", "della vendita",
     "contratto della vendita. la vendita di cosa. usufrutto della cosa."),
    ("2", "del pegno",
     "il pegno del bene. pegno di cosa. usufrutto del bene."),
    ("3", "del danno",
     "danno della cosa. il danno deve prova. servitu della parte. "
     "servitu del bene."),
    ("3-bis", "della tutela",
     "tutela del possesso. la tutela della parte. enfiteusi del bene. "
     "enfiteusi di cosa."),
    ("10", "della prova",
     "prova del contratto. la prova deve parte. donazione del bene. "
     "donazione della cosa."),
]


def lexpipe(args, label):
    argv = ["lexpipe"] if shutil.which("lexpipe") else \
        [sys.executable, "-c",
         "import sys; from lexpipe.cli import main; sys.exit(main(sys.argv[1:]))"]
    proc = subprocess.run(argv + args, capture_output=True, text=True)
    assert proc.returncode == 0, f"{label}: {proc.stderr.strip()}"


class TestBridgeRoundTrip:
    def test_one_epoch_toy_round_trip(self, tiny_base, tmp_path):
        raw = tmp_path / "raw.json"
        raw.write_text(json.dumps({"books": [{
            "book": 1,
            "divisions": [{"id": "c1", "level": "chapter",
                           "heading": "dei beni", "children": []}],
            "articles": [{"id": aid, "title": title, "content": content,
                          "division": "c1"}
                         for aid, title, content in RAW_ARTICLES],
        }]}), encoding="utf-8")

        lexpipe(["ingest", "--corpus", str(raw),
                 "--out-dir", str(tmp_path / "ing")], "ingest")
        corpus = tmp_path / "ing" / "corpus_normalized.json"
        lexpipe(["make-training", "--corpus", str(corpus), "--scheme",
                 "uni-rr", "--min-tu", "8",
                 "--out-dir", str(tmp_path / "tr")], "make-training")
        training = tmp_path / "tr" / "book1_uni-rr_tu8.jsonl"
        lexpipe(["vocab", "--corpus", str(corpus),
                 "--base-vocab", str(tiny_base / "vocab.txt"),
                 "--out-dir", str(tmp_path / "vb")], "vocab")
        report_path = tmp_path / "vb" / "injection_report.json"
        lexpipe(["make-queries", "--qtype", "1", "--count", "1", "--seed", "0",
                 "--corpus", str(corpus),
                 "--out-dir", str(tmp_path / "q")], "make-queries")
        queries = tmp_path / "q" / "queries_q1_book1.jsonl"

        report = json.loads(report_path.read_text())
        assert set(report["terms"]) == {"usufrutto", "servitu", "enfiteusi"}

        config = FineTuneConfig(base_model=str(tiny_base), epochs=1,
                                batch_size=16, max_seq_len=32,
                                injected_terms=str(report_path), seed=0)
        checkpoint = fine_tune(training, config, tmp_path / "ck")

        tokenizer, _, labels, _ = load_classifier(checkpoint)
        assert len(tokenizer) == report["base_vocab_size"] + report["n_injected"]
        assert labels == ["1", "2", "3", "3-bis", "10"]
        log = (checkpoint / "training_log.jsonl").read_text().splitlines()
        assert len(log) == 1

        pred_csv = tmp_path / "pred.csv"
        predict_queries(checkpoint, queries, pred_csv, max_seq_len=32)
        with open(pred_csv, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["query_id", "1", "2", "3", "3-bis", "10"]
        lexpipe(["load-predictions", "--predictions", str(pred_csv),
                 "--out-dir", str(tmp_path / "lp")], "load-predictions")
        assert (tmp_path / "lp" / "predictions_canonical.csv").is_file()
        lexpipe(["eval-single", "--predictions", str(pred_csv),
                 "--queries", str(queries), "--ks", "2,3",
                 "--label", "bridge",
                 "--out-dir", str(tmp_path / "es")], "eval-single")
        scores = json.loads(
            (tmp_path / "es" / "metrics_bridge.json").read_text())
        assert 0.0 <= scores["metrics"]["MRR"] <= 1.0

        emb_csv = tmp_path / "emb.csv"
        export_embeddings(checkpoint, corpus, emb_csv, max_seq_len=32)
        lexpipe(["cluster", "--embeddings", str(emb_csv), "--k", "2",
                 "--seed", "0", "--out-dir", str(tmp_path / "cl")], "cluster")
        with open(tmp_path / "cl" / "partition_kmeans_k2.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 5
        assert {label for _, label in rows} <= {"0", "1"}

        print("ACCEPTANCE bridge-round-trip: PASS")
