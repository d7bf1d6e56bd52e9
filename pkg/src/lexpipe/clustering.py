"""Article grouping: bisecting spherical k-means and the code's own partition.

Vectors are unit-norm rows (TF-IDF over whole articles, or embeddings read
from a CSV).  Bisection always splits the current largest cluster with an
inner cosine 2-means, restarted ``n_trials`` times from seeded inits; the
restart with the highest total cohesion (sum of cosines to the assigned
centroid) wins.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .corpus import Corpus, article_sort_key, tokenize


class ClusteringError(ValueError):
    """Raised for unusable vectors or invalid clustering requests."""


N_TRIALS = 5
MAX_ITERATIONS = 100
INIT_SAMPLE = 10


def tfidf_article_vectors(corpus: Corpus) -> Tuple[List[str], sparse.csr_matrix]:
    """One unit-norm TF-IDF row per article (title plus sentences).

    idf = ln(n_articles / df); articles left with a zero vector are an error.
    """
    docs = [tokenize(" ".join([a.title] + a.sentences)) for a in corpus.articles]
    df: Counter = Counter()
    for tokens in docs:
        df.update(set(tokens))
    if not df:
        raise ClusteringError("corpus contains no terms")
    terms = sorted(df)
    index = {t: i for i, t in enumerate(terms)}
    n = len(docs)
    idf = np.array([math.log(n / df[t]) for t in terms])

    indptr = [0]
    indices: List[int] = []
    values: List[float] = []
    zero_vectors = []
    for article, tokens in zip(corpus.articles, docs):
        vec: Dict[int, float] = {}
        for term, tf in Counter(tokens).items():
            w = tf * idf[index[term]]
            if w != 0.0:
                vec[index[term]] = w
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm == 0:
            zero_vectors.append(article.article_id)
            continue
        for j in sorted(vec):
            indices.append(j)
            values.append(vec[j] / norm)
        indptr.append(len(indices))
    if zero_vectors:
        raise ClusteringError(
            f"articles with zero TF-IDF vectors: {zero_vectors}")

    matrix = sparse.csr_matrix(
        (np.array(values), np.array(indices), np.array(indptr)),
        shape=(n, len(terms)))
    return [a.article_id for a in corpus.articles], matrix


def choose_k(n_items: int, target_mean_size: int = 3) -> int:
    if n_items < 1:
        raise ClusteringError("cannot cluster zero items")
    if target_mean_size < 1:
        raise ClusteringError("target_mean_size must be >= 1")
    return max(1, math.floor(n_items / target_mean_size + 0.5))


@dataclass
class SplitTrace:
    cluster_size: int
    chosen_trial: int
    cohesion: float
    # cohesion at each inner iteration of the winning trial, measured at
    # assignment time; non-decreasing by construction
    iteration_cohesion: List[float] = field(default_factory=list)


@dataclass
class ClusterResult:
    labels: List[int]               # one per input row, 0-based
    k: int
    total_cohesion: float
    splits: List[SplitTrace] = field(default_factory=list)


def _rows(matrix, idx: Sequence[int]):
    return matrix[np.array(idx, dtype=np.intp)]


def _mean_direction(block) -> np.ndarray:
    mean = np.asarray(block.mean(axis=0)).ravel()
    norm = float(np.linalg.norm(mean))
    return mean / norm if norm > 0 else mean


def _two_means(block, rng: np.random.Generator,
               max_iter: int = MAX_ITERATIONS):
    """Spherical 2-means on unit rows; returns (assign, cohesion, trace)."""
    m = block.shape[0]
    sample = np.sort(rng.choice(m, size=min(INIT_SAMPLE, m), replace=False))
    sims = np.asarray((_rows(block, sample) @ _rows(block, sample).T).todense()) \
        if sparse.issparse(block) else _rows(block, sample) @ _rows(block, sample).T
    # the most cosine-distant pair in the sample seeds the two centroids;
    # first minimal pair in scan order on ties
    best_pair = (0, min(1, len(sample) - 1))
    best_sim = np.inf
    for i in range(len(sample)):
        for j in range(i + 1, len(sample)):
            if sims[i, j] < best_sim:
                best_sim = sims[i, j]
                best_pair = (i, j)
    centroids = np.vstack([
        np.asarray(block[int(sample[best_pair[0]])].todense()).ravel()
        if sparse.issparse(block) else block[int(sample[best_pair[0]])],
        np.asarray(block[int(sample[best_pair[1]])].todense()).ravel()
        if sparse.issparse(block) else block[int(sample[best_pair[1]])],
    ])

    assign = np.zeros(m, dtype=np.int64)
    trace: List[float] = []
    for _ in range(max_iter):
        scores = block @ centroids.T
        scores = np.asarray(scores.todense()) if sparse.issparse(scores) else scores
        # ties go to the lower centroid index
        new_assign = np.where(scores[:, 1] > scores[:, 0], 1, 0)
        trace.append(float(scores[np.arange(m), new_assign].sum()))
        for side in (0, 1):
            if not np.any(new_assign == side):
                donor = 1 - side
                members = np.flatnonzero(new_assign == donor)
                worst = members[int(np.argmin(scores[members, donor]))]
                new_assign[worst] = side
        converged = np.array_equal(new_assign, assign) and len(trace) > 1
        assign = new_assign
        for side in (0, 1):
            centroids[side] = _mean_direction(_rows(block, np.flatnonzero(assign == side)))
        if converged:
            break

    scores = block @ centroids.T
    scores = np.asarray(scores.todense()) if sparse.issparse(scores) else scores
    cohesion = float(scores[np.arange(m), assign].sum())
    return assign, cohesion, trace


def bisecting_spherical_kmeans(matrix, k: int, seed: int = 0,
                               n_trials: int = N_TRIALS) -> ClusterResult:
    """Split the largest cluster k-1 times; deterministic for a fixed seed."""
    n = matrix.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k must be in 1..{n}, got {k}")

    clusters: List[List[int]] = [list(range(n))]
    splits: List[SplitTrace] = []
    for split_round in range(k - 1):
        target = max(range(len(clusters)),
                     key=lambda i: (len(clusters[i]), -i))
        members = clusters[target]
        if len(members) < 2:
            raise ClusteringError(
                f"cannot reach k={k}: largest cluster has one item")
        block = _rows(matrix, members)

        best: Optional[Tuple[np.ndarray, float, List[float], int]] = None
        for trial in range(n_trials):
            rng = np.random.default_rng([seed, split_round, trial])
            assign, cohesion, trace = _two_means(block, rng)
            if best is None or cohesion > best[1]:
                best = (assign, cohesion, trace, trial)

        assign, cohesion, trace, trial = best
        left = [members[i] for i in np.flatnonzero(assign == 0)]
        right = [members[i] for i in np.flatnonzero(assign == 1)]
        clusters[target] = left
        clusters.append(right)
        splits.append(SplitTrace(cluster_size=len(members), chosen_trial=trial,
                                 cohesion=cohesion, iteration_cohesion=trace))

    labels = [0] * n
    total = 0.0
    for label, members in enumerate(clusters):
        for i in members:
            labels[i] = label
        centroid = _mean_direction(_rows(matrix, members))
        block = _rows(matrix, members)
        scores = block @ centroid
        scores = np.asarray(scores).ravel()
        total += float(scores.sum())
    return ClusterResult(labels=labels, k=len(clusters),
                         total_cohesion=total, splits=splits)


def icc_partition(corpus: Corpus) -> Dict[str, str]:
    """The code's own grouping: each article labeled with its terminal division."""
    return {a.article_id: a.division_id for a in corpus.articles}


def write_partition(mapping: Dict[str, object], path) -> None:
    ids = sorted(mapping, key=article_sort_key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("article_id,partition_id\n")
        for aid in ids:
            fh.write(f"{aid},{mapping[aid]}\n")


def read_partition(path) -> Dict[str, str]:
    mapping: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["article_id", "partition_id"]:
            raise ClusteringError(
                f"{path}: header must be 'article_id,partition_id'")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 2:
                raise ClusteringError(f"{path}:{lineno}: expected two fields")
            if rec[0] in mapping:
                raise ClusteringError(f"{path}:{lineno}: duplicate article {rec[0]!r}")
            mapping[rec[0]] = rec[1]
    if not mapping:
        raise ClusteringError(f"{path}: empty partition map")
    return mapping


def write_embeddings(ids: Sequence[str], matrix: np.ndarray, path) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("article_id," + ",".join(f"v{j}" for j in range(matrix.shape[1])) + "\n")
        for aid, row in zip(ids, matrix):
            fh.write(aid + "," + ",".join(str(float(x)) for x in row) + "\n")


def load_embeddings(path) -> Tuple[List[str], np.ndarray]:
    """Read an embedding table and L2-normalize the rows."""
    ids: List[str] = []
    rows: List[List[float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "article_id" or len(header) < 2:
            raise ClusteringError(f"{path}: header must be 'article_id,v0,...'")
        width = len(header)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise ClusteringError(
                    f"{path}:{lineno}: expected {width} fields, got {len(rec)}")
            ids.append(rec[0])
            try:
                rows.append([float(x) for x in rec[1:]])
            except ValueError as exc:
                raise ClusteringError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ClusteringError(f"{path}: no embedding rows")
    if len(set(ids)) != len(ids):
        raise ClusteringError(f"{path}: duplicate article ids")
    matrix = np.array(rows)
    if not np.all(np.isfinite(matrix)):
        raise ClusteringError(f"{path}: non-finite embedding values")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        aid = ids[int(np.argmax(norms == 0))]
        raise ClusteringError(f"{path}: zero embedding for article {aid!r}")
    return ids, matrix / norms[:, None]
