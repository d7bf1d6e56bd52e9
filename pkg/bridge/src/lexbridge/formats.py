"""Readers and writers for the files shared with the evaluation pipeline.

The exchange contract: training units and queries arrive as JSONL,
injected terms as a JSON report, and results leave as CSVs the pipeline
validates on load (prediction rows must sum to 1, embedding rows must be
non-zero).  Article ids sort in statute order ("2" < "2-bis" < "10"),
which fixes the CSV column order.
"""

import json
from typing import Dict, List, Sequence, Tuple

import numpy as np


class BridgeError(ValueError):
    """Raised for malformed inputs or broken exchange contracts."""


_SUFFIXES = ("bis", "ter", "quater", "quinquies", "sexies", "septies",
             "octies", "novies", "decies", "undecies", "duodecies",
             "terdecies", "quaterdecies")


def article_sort_key(article_id: str):
    """Statute order: numeric part, then the Latin suffix sequence."""
    head = article_id
    suffix = ""
    if "-" in article_id:
        head, _, suffix = article_id.partition("-")
    if not head.isdigit():
        return (1, 0, article_id, "")
    if not suffix:
        return (0, int(head), "", "")
    if suffix in _SUFFIXES:
        return (0, int(head), "", chr(_SUFFIXES.index(suffix) + 1))
    return (0, int(head), suffix, chr(len(_SUFFIXES) + 2))


def _read_jsonl(path) -> List[Tuple[int, Dict]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(record, dict):
                raise BridgeError(f"{path}:{lineno}: expected a JSON object")
            out.append((lineno, record))
    return out


def read_training_units(path) -> List[Tuple[str, str]]:
    """(article_id, text) pairs from a training-set JSONL file."""
    units = []
    for lineno, record in _read_jsonl(path):
        try:
            units.append((str(record["article_id"]), str(record["text"])))
        except KeyError as exc:
            raise BridgeError(
                f"{path}:{lineno}: missing field {exc.args[0]!r}") from None
    if not units:
        raise BridgeError(f"{path}: no training units")
    return units


def read_queries(path) -> List[Tuple[str, str]]:
    """(query_id, text) pairs from a query-set JSONL file."""
    queries = []
    seen = set()
    for lineno, record in _read_jsonl(path):
        try:
            qid, text = str(record["query_id"]), str(record["text"])
        except KeyError as exc:
            raise BridgeError(
                f"{path}:{lineno}: missing field {exc.args[0]!r}") from None
        if qid in seen:
            raise BridgeError(f"{path}:{lineno}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append((qid, text))
    if not queries:
        raise BridgeError(f"{path}: no queries")
    return queries


def read_injection_terms(path) -> List[str]:
    """Injected terms from a term-injection report."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "terms" not in data:
        raise BridgeError(f"{path}: expected an injection report with 'terms'")
    terms = [str(t) for t in data["terms"]]
    declared = data.get("n_injected")
    if declared is not None and declared != len(terms):
        raise BridgeError(
            f"{path}: report declares {declared} injected terms but lists "
            f"{len(terms)}")
    return terms


def read_corpus_articles(path) -> List[Tuple[str, str]]:
    """(article_id, full text) per article of a normalized corpus JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "books" not in data:
        raise BridgeError(f"{path}: expected a corpus object with 'books'")
    out = []
    seen = set()
    for book in data["books"]:
        for entry in book.get("articles", []):
            try:
                aid = str(entry["id"])
                parts = [str(entry["title"])] + [str(s) for s in entry["sentences"]]
            except (KeyError, TypeError) as exc:
                raise BridgeError(f"{path}: malformed article entry: {exc}") from None
            if aid in seen:
                raise BridgeError(f"{path}: duplicate article id {aid!r}")
            seen.add(aid)
            out.append((aid, " ".join(parts)))
    if not out:
        raise BridgeError(f"{path}: corpus has no articles")
    out.sort(key=lambda pair: article_sort_key(pair[0]))
    return out


def write_prediction_csv(query_ids: Sequence[str], article_ids: Sequence[str],
                         rows: np.ndarray, path) -> None:
    """Write a prediction matrix; rows are renormalized to sum to 1."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape != (len(query_ids), len(article_ids)):
        raise BridgeError(
            f"prediction shape {rows.shape} does not match "
            f"{len(query_ids)} queries x {len(article_ids)} articles")
    if not np.all(np.isfinite(rows)) or np.any(rows < 0):
        raise BridgeError("prediction values must be finite and non-negative")
    sums = rows.sum(axis=1)
    if np.any(sums <= 0):
        qid = query_ids[int(np.argmax(sums <= 0))]
        raise BridgeError(f"all-zero prediction row for query {qid!r}")
    rows = rows / sums[:, None]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("query_id," + ",".join(article_ids) + "\n")
        for qid, row in zip(query_ids, rows):
            fh.write(qid + "," + ",".join(str(float(p)) for p in row) + "\n")


def write_embedding_csv(article_ids: Sequence[str], matrix: np.ndarray,
                        path) -> None:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != len(article_ids):
        raise BridgeError(
            f"embedding shape {matrix.shape} does not match "
            f"{len(article_ids)} articles")
    if not np.all(np.isfinite(matrix)):
        raise BridgeError("embedding values must be finite")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        aid = article_ids[int(np.argmax(norms == 0))]
        raise BridgeError(f"zero embedding for article {aid!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("article_id," + ",".join(f"v{j}" for j in range(matrix.shape[1])) + "\n")
        for aid, row in zip(article_ids, matrix):
            fh.write(aid + "," + ",".join(str(float(x)) for x in row) + "\n")


def write_training_log(entries: Sequence[Dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
