"""TF-IDF centroid classifier over training units, plus the prediction CSV.

Training builds one L2-normalized centroid per article from the unit
vectors (raw term counts weighted by idf = ln(n_units / df)).  Prediction
scores a query by cosine against every centroid, clamps negatives to zero
and normalizes the scores into a probability row.

The prediction matrix CSV is the exchange format between components:
header ``query_id,<article ids...>``, one probability row per query.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .corpus import article_sort_key, normalize_text, tokenize
from .labeling import TrainingUnit
from .querygen import Query


class BaselineError(ValueError):
    """Raised for untrainable inputs or unanswerable queries."""


class PredictionError(ValueError):
    """Raised when a prediction matrix violates the exchange contract."""


ROW_SUM_WRITE_TOL = 1e-6
ROW_SUM_LOAD_TOL = 1e-4


@dataclass
class PredictionMatrix:
    query_ids: List[str]
    article_ids: List[str]
    rows: np.ndarray

    def validate(self, tol: float = ROW_SUM_WRITE_TOL) -> None:
        n_q, n_c = self.rows.shape
        if n_q != len(self.query_ids) or n_c != len(self.article_ids):
            raise PredictionError("matrix shape does not match id lists")
        if len(set(self.article_ids)) != n_c:
            raise PredictionError("duplicate article columns")
        if len(set(self.query_ids)) != n_q:
            raise PredictionError("duplicate query ids")
        if not np.all(np.isfinite(self.rows)):
            raise PredictionError("matrix contains non-finite values")
        if np.any(self.rows < 0):
            raise PredictionError("matrix contains negative probabilities")
        bad = np.abs(self.rows.sum(axis=1) - 1.0) > tol
        if np.any(bad):
            qid = self.query_ids[int(np.argmax(bad))]
            raise PredictionError(f"row for query {qid!r} does not sum to 1")

    def column(self, article_id: str) -> int:
        try:
            return self.article_ids.index(article_id)
        except ValueError:
            raise PredictionError(f"article {article_id!r} is not a matrix column")


@dataclass
class CentroidModel:
    article_ids: List[str]          # class order, ascending article id
    terms: List[str]                # vocabulary, sorted
    idf: np.ndarray                 # per-term, aligned with terms
    centroids: sparse.csr_matrix    # one unit-norm row per class
    n_units: int

    @property
    def term_index(self) -> Dict[str, int]:
        cached = getattr(self, "_term_index", None)
        if cached is None:
            cached = {t: i for i, t in enumerate(self.terms)}
            object.__setattr__(self, "_term_index", cached)
        return cached


def train_baseline(units: Iterable[TrainingUnit]) -> CentroidModel:
    """Fit per-article centroids from training units."""
    units = list(units)
    if not units:
        raise BaselineError("no training units")

    unit_tokens = [tokenize(u.text) for u in units]
    df: Counter = Counter()
    for tokens in unit_tokens:
        df.update(set(tokens))
    if not df:
        raise BaselineError("training units contain no terms")

    terms = sorted(df)
    index = {t: i for i, t in enumerate(terms)}
    n_units = len(units)
    idf = np.array([math.log(n_units / df[t]) for t in terms])

    article_ids = sorted({u.article_id for u in units}, key=article_sort_key)
    class_of = {aid: c for c, aid in enumerate(article_ids)}
    sums: List[Dict[int, float]] = [dict() for _ in article_ids]
    counts = [0] * len(article_ids)

    for unit, tokens in zip(units, unit_tokens):
        vec: Dict[int, float] = {}
        for term, tf in Counter(tokens).items():
            w = tf * idf[index[term]]
            if w != 0.0:
                vec[index[term]] = w
        norm = math.sqrt(sum(w * w for w in vec.values()))
        c = class_of[unit.article_id]
        counts[c] += 1
        if norm > 0:
            acc = sums[c]
            for j, w in vec.items():
                acc[j] = acc.get(j, 0.0) + w / norm

    indptr = [0]
    indices: List[int] = []
    values: List[float] = []
    for c, aid in enumerate(article_ids):
        acc = sums[c]
        mean = {j: w / counts[c] for j, w in acc.items()}
        norm = math.sqrt(sum(w * w for w in mean.values()))
        if norm == 0:
            raise BaselineError(
                f"article {aid!r} has no in-vocabulary terms; cannot form a centroid")
        for j in sorted(mean):
            indices.append(j)
            values.append(mean[j] / norm)
        indptr.append(len(indices))

    centroids = sparse.csr_matrix(
        (np.array(values), np.array(indices), np.array(indptr)),
        shape=(len(article_ids), len(terms)))
    return CentroidModel(article_ids=article_ids, terms=terms, idf=idf,
                         centroids=centroids, n_units=n_units)


def _query_vector(model: CentroidModel, text: str) -> Tuple[np.ndarray, np.ndarray]:
    tokens = tokenize(normalize_text(text))
    if not tokens:
        raise BaselineError(f"query is empty after normalization: {text!r}")
    index = model.term_index
    cols: List[int] = []
    vals: List[float] = []
    for term, tf in Counter(tokens).items():
        j = index.get(term)
        if j is not None:
            w = tf * model.idf[j]
            if w != 0.0:
                cols.append(j)
                vals.append(w)
    return np.array(cols, dtype=np.int64), np.array(vals)


def _to_probabilities(scores: np.ndarray) -> np.ndarray:
    scores = np.maximum(scores, 0.0)
    total = scores.sum()
    if total <= 0:
        return np.full(scores.shape, 1.0 / len(scores))
    return scores / total


def predict(model: CentroidModel, text: str) -> np.ndarray:
    """Probability row over the model's classes for one query text."""
    cols, vals = _query_vector(model, text)
    scores = np.zeros(len(model.article_ids))
    if len(cols):
        q = sparse.csc_matrix(
            (vals, (cols, np.zeros(len(cols), dtype=np.int64))),
            shape=(len(model.terms), 1))
        # Centroids are unit vectors, so the dot product is cosine up to the
        # query norm, which cancels in the normalization below.
        scores = np.asarray(model.centroids.dot(q).todense()).ravel()
    return _to_probabilities(scores)


def predict_set(model: CentroidModel, queries: Sequence[Query]) -> PredictionMatrix:
    rows = np.vstack([predict(model, q.text) for q in queries]) if queries \
        else np.zeros((0, len(model.article_ids)))
    pm = PredictionMatrix(query_ids=[q.query_id for q in queries],
                          article_ids=list(model.article_ids), rows=rows)
    pm.validate()
    return pm


def save_model(model: CentroidModel, path) -> None:
    coo = model.centroids.tocoo()
    per_class: List[Tuple[List[int], List[float]]] = [([], []) for _ in model.article_ids]
    for c, j, v in zip(coo.row, coo.col, coo.data):
        per_class[int(c)][0].append(int(j))
        per_class[int(c)][1].append(float(v))
    data = {
        "article_ids": model.article_ids,
        "terms": model.terms,
        "idf": [float(x) for x in model.idf],
        "n_units": model.n_units,
        "centroids": [{"cols": cols, "vals": vals} for cols, vals in per_class],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
        fh.write("\n")


def load_model(path) -> CentroidModel:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        article_ids = list(data["article_ids"])
        terms = list(data["terms"])
        idf = np.array(data["idf"], dtype=float)
        n_units = int(data["n_units"])
        indptr = [0]
        indices: List[int] = []
        values: List[float] = []
        for entry in data["centroids"]:
            indices.extend(int(j) for j in entry["cols"])
            values.extend(float(v) for v in entry["vals"])
            indptr.append(len(indices))
    except (KeyError, TypeError, ValueError) as exc:
        raise BaselineError(f"bad model file {path}: {exc}") from None
    centroids = sparse.csr_matrix(
        (np.array(values), np.array(indices), np.array(indptr)),
        shape=(len(article_ids), len(terms)))
    return CentroidModel(article_ids=article_ids, terms=terms, idf=idf,
                         centroids=centroids, n_units=n_units)


def write_predictions(pm: PredictionMatrix, path) -> None:
    """Write the exchange CSV; floats keep full round-trip precision."""
    pm.validate()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("query_id," + ",".join(pm.article_ids) + "\n")
        for qid, row in zip(pm.query_ids, pm.rows):
            fh.write(qid + "," + ",".join(str(float(p)) for p in row) + "\n")


def load_predictions(path) -> PredictionMatrix:
    """Parse and validate an exchange CSV; near-1 rows are renormalized."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionError(f"{path}: empty prediction file") from None
        if not header or header[0] != "query_id" or len(header) < 2:
            raise PredictionError(
                f"{path}: header must be 'query_id,<article ids>'")
        article_ids = header[1:]
        query_ids: List[str] = []
        rows: List[List[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise PredictionError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            query_ids.append(rec[0])
            try:
                rows.append([float(x) for x in rec[1:]])
            except ValueError as exc:
                raise PredictionError(f"{path}:{lineno}: {exc}") from None

    if not rows:
        raise PredictionError(f"{path}: no prediction rows")
    matrix = np.array(rows)
    if not np.all(np.isfinite(matrix)):
        raise PredictionError(f"{path}: non-finite probabilities")
    if np.any(matrix < 0):
        raise PredictionError(f"{path}: negative probabilities")
    sums = matrix.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_LOAD_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PredictionError(
            f"{path}: row for query {query_ids[i]!r} sums to {sums[i]!r}")
    matrix = matrix / sums[:, None]
    pm = PredictionMatrix(query_ids=query_ids, article_ids=article_ids,
                          rows=matrix)
    pm.validate()
    return pm
