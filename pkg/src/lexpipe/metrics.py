"""Retrieval metrics over prediction matrices.

Ranking is by descending probability with ties broken by ascending article
id, everywhere.  Three protocols:

single-label   top-1 confusion scores, R@k, MRR and normalized entropy for
               queries with one gold article
article-driven the gold article's partition is the relevant set; the top
               |relevant| ranks are the predicted set
topic-driven   multi-label gold (division queries); top |gold| ranks plus
               precision at fixed cutoffs

Per-class precision with no predictions of a class is 0; classes with
neither queries nor predictions are left out of the averages, and classes
with predictions but no queries enter the recall mean only on request.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .baseline import PredictionMatrix
from .corpus import article_sort_key
from .querygen import Query


class MetricError(ValueError):
    """Raised when predictions and queries cannot be scored together."""


def _key_ranks(article_ids: Sequence[str]) -> np.ndarray:
    """Position of each column in ascending article-id order."""
    order = sorted(range(len(article_ids)),
                   key=lambda j: article_sort_key(article_ids[j]))
    ranks = np.empty(len(article_ids), dtype=np.int64)
    for pos, j in enumerate(order):
        ranks[j] = pos
    return ranks


def ranked_indices(row: np.ndarray, key_ranks: np.ndarray) -> np.ndarray:
    """Column indices from best to worst rank."""
    return np.lexsort((key_ranks, -row))


def _align(pm: PredictionMatrix, queries: Sequence[Query]) -> List[int]:
    if not queries:
        raise MetricError("no queries to evaluate")
    row_of = {qid: i for i, qid in enumerate(pm.query_ids)}
    missing = [q.query_id for q in queries if q.query_id not in row_of]
    if missing:
        raise MetricError(f"queries missing from the prediction matrix: {missing}")
    if len(queries) != len(pm.query_ids):
        extra = set(pm.query_ids) - {q.query_id for q in queries}
        raise MetricError(f"prediction rows without queries: {sorted(extra)}")
    return [row_of[q.query_id] for q in queries]


def _gold_column(pm: PredictionMatrix, query: Query,
                 col_of: Mapping[str, int]) -> int:
    if len(query.gold) != 1:
        raise MetricError(
            f"query {query.query_id!r} must have exactly one gold article")
    gold = query.gold[0]
    if gold not in col_of:
        raise MetricError(
            f"gold article {gold!r} of query {query.query_id!r} is not a "
            f"matrix column")
    return col_of[gold]


def _gold_ranks(pm: PredictionMatrix, queries: Sequence[Query]) -> List[int]:
    """1-based rank of each query's gold article."""
    rows = _align(pm, queries)
    col_of = {aid: j for j, aid in enumerate(pm.article_ids)}
    key_ranks = _key_ranks(pm.article_ids)
    ranks = []
    for query, i in zip(queries, rows):
        g = _gold_column(pm, query, col_of)
        row = pm.rows[i]
        better = int(np.sum(row > row[g]))
        tied_before = int(np.sum((row == row[g]) & (key_ranks < key_ranks[g])))
        ranks.append(1 + better + tied_before)
    return ranks


def single_label_scores(pm: PredictionMatrix, queries: Sequence[Query],
                        include_unqueried_recall: bool = False) -> Dict:
    """Top-1 confusion scores with per-class breakdown."""
    rows = _align(pm, queries)
    col_of = {aid: j for j, aid in enumerate(pm.article_ids)}
    key_ranks = _key_ranks(pm.article_ids)

    n_classes = len(pm.article_ids)
    gold_count = np.zeros(n_classes, dtype=np.int64)
    pred_count = np.zeros(n_classes, dtype=np.int64)
    correct = np.zeros(n_classes, dtype=np.int64)
    for query, i in zip(queries, rows):
        g = _gold_column(pm, query, col_of)
        top1 = int(ranked_indices(pm.rows[i], key_ranks)[0])
        gold_count[g] += 1
        pred_count[top1] += 1
        if top1 == g:
            correct[g] += 1

    active = [c for c in range(n_classes) if gold_count[c] or pred_count[c]]
    per_class = {}
    p_values, r_values, f_values = [], [], []
    for c in active:
        p_c = correct[c] / pred_count[c] if pred_count[c] else 0.0
        r_c = correct[c] / gold_count[c] if gold_count[c] else 0.0
        f_c = 2 * p_c * r_c / (p_c + r_c) if p_c + r_c > 0 else 0.0
        per_class[pm.article_ids[c]] = {
            "queries": int(gold_count[c]), "predicted": int(pred_count[c]),
            "correct": int(correct[c]), "P": p_c, "R": r_c, "F": f_c,
        }
        p_values.append(p_c)
        f_values.append(f_c)
        if gold_count[c] or include_unqueried_recall:
            r_values.append(r_c)

    precision = float(np.mean(p_values)) if p_values else 0.0
    recall = float(np.mean(r_values)) if r_values else 0.0
    f_micro = float(np.mean(f_values)) if f_values else 0.0
    f_macro = (2 * precision * recall / (precision + recall)
               if precision + recall > 0 else 0.0)
    return {
        "P": precision, "R": recall, "F_micro": f_micro, "F_macro": f_macro,
        "per_class": per_class,
    }


def recall_at_k(pm: PredictionMatrix, queries: Sequence[Query],
                ks: Sequence[int] = (3, 10)) -> Dict[int, float]:
    for k in ks:
        if not 1 <= k <= len(pm.article_ids):
            raise MetricError(f"k={k} is out of range for "
                              f"{len(pm.article_ids)} classes")
    ranks = _gold_ranks(pm, queries)
    return {k: float(np.mean([1.0 if r <= k else 0.0 for r in ranks]))
            for k in ks}


def mrr(pm: PredictionMatrix, queries: Sequence[Query]) -> float:
    ranks = _gold_ranks(pm, queries)
    return float(np.mean([1.0 / r for r in ranks]))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy_scores(pm: PredictionMatrix, ks: Sequence[int] = (3, 10),
                   renormalize: bool = True) -> Dict[str, float]:
    """Mean normalized entropy of the rows, whole and at top-k cutoffs.

    Whole-row entropy divides by log2(n_classes).  At a cutoff the top-k
    probabilities are renormalized (default) and divided by log2(k); the
    raw variant skips the renormalization.
    """
    n_classes = len(pm.article_ids)
    if n_classes < 2:
        raise MetricError("entropy needs at least 2 classes")
    for k in ks:
        if not 2 <= k <= n_classes:
            raise MetricError(f"entropy cutoff k={k} must be in 2..{n_classes}")
    key_ranks = _key_ranks(pm.article_ids)

    full = [_entropy_bits(row) / math.log2(n_classes) for row in pm.rows]
    out = {"E": float(np.mean(full))}
    for k in ks:
        values = []
        for row in pm.rows:
            top = row[ranked_indices(row, key_ranks)[:k]]
            if renormalize:
                top = top / top.sum()
            values.append(_entropy_bits(top) / math.log2(k))
        out[f"E@{k}"] = float(np.mean(values))
    return out


def evaluate_single(pm: PredictionMatrix, queries: Sequence[Query],
                    ks: Sequence[int] = (3, 10),
                    include_unqueried_recall: bool = False,
                    label: Optional[str] = None) -> Dict:
    """Full single-label report: confusion scores, R@k, MRR, entropy."""
    scores = single_label_scores(pm, queries, include_unqueried_recall)
    ranks = _gold_ranks(pm, queries)
    rk = recall_at_k(pm, queries, ks)
    ent = entropy_scores(pm, [k for k in ks if k >= 2])

    col_of = {aid: j for j, aid in enumerate(pm.article_ids)}
    key_ranks = _key_ranks(pm.article_ids)
    rows = _align(pm, queries)
    per_query = []
    for query, i, rank in zip(queries, rows, ranks):
        top1 = pm.article_ids[int(ranked_indices(pm.rows[i], key_ranks)[0])]
        per_query.append({
            "query_id": query.query_id, "gold": query.gold[0],
            "top1": top1, "rank": rank, "reciprocal_rank": 1.0 / rank,
        })

    metrics = {
        "P": scores["P"], "R": scores["R"],
        "F_micro": scores["F_micro"], "F_macro": scores["F_macro"],
        "MRR": float(np.mean([1.0 / r for r in ranks])),
    }
    for k in ks:
        metrics[f"R@{k}"] = rk[k]
    metrics.update(ent)
    return {
        "protocol": "single-label",
        "label": label or "single-label",
        "n_queries": len(queries),
        "n_classes": len(pm.article_ids),
        "metrics": metrics,
        "per_class": scores["per_class"],
        "per_query": per_query,
    }


def multilabel_article_driven(pm: PredictionMatrix, queries: Sequence[Query],
                              partition: Mapping[str, str],
                              label: Optional[str] = None) -> Dict:
    """Score single-gold queries against the gold article's whole partition."""
    rows = _align(pm, queries)
    col_of = {aid: j for j, aid in enumerate(pm.article_ids)}
    key_ranks = _key_ranks(pm.article_ids)

    members: Dict[str, List[str]] = {}
    for aid, pid in partition.items():
        members.setdefault(pid, []).append(aid)

    per_query = []
    p_values = []
    for query, i in zip(queries, rows):
        g = pm.article_ids[_gold_column(pm, query, col_of)]
        if g not in partition:
            raise MetricError(
                f"gold article {g!r} of query {query.query_id!r} is not in "
                f"the partition map")
        relevant = set(members[partition[g]])
        outside = relevant - set(col_of)
        if outside:
            raise MetricError(
                f"partition of {g!r} contains non-column articles: "
                f"{sorted(outside)}")
        n = len(relevant)
        top = ranked_indices(pm.rows[i], key_ranks)[:n]
        overlap = sum(1 for j in top if pm.article_ids[int(j)] in relevant)
        score = overlap / n
        p_values.append(score)
        per_query.append({
            "query_id": query.query_id, "gold": g,
            "partition_id": partition[g], "n_relevant": n,
            "n_overlap": overlap, "F": score,
        })

    precision = float(np.mean(p_values))
    # predicted and relevant sets share their size, so P, R and micro-F
    # coincide query by query
    f_macro = precision
    return {
        "protocol": "article-driven",
        "label": label or "article-driven",
        "n_queries": len(queries),
        "n_classes": len(pm.article_ids),
        "metrics": {"P": precision, "R": precision,
                    "F_micro": precision, "F_macro": f_macro},
        "per_query": per_query,
    }


def multilabel_topic_driven(pm: PredictionMatrix, queries: Sequence[Query],
                            ks: Sequence[int] = (3, 10),
                            label: Optional[str] = None) -> Dict:
    """Score multi-gold queries by the top |gold| ranks plus P@k cutoffs."""
    rows = _align(pm, queries)
    col_set = set(pm.article_ids)
    key_ranks = _key_ranks(pm.article_ids)
    for k in ks:
        if not 1 <= k <= len(pm.article_ids):
            raise MetricError(f"k={k} is out of range for "
                              f"{len(pm.article_ids)} classes")

    per_query = []
    f_values = []
    p_at_k = {k: [] for k in ks}
    gold_sizes = []
    for query, i in zip(queries, rows):
        gold = set(query.gold)
        if not gold:
            raise MetricError(f"query {query.query_id!r} has empty gold")
        missing = gold - col_set
        if missing:
            raise MetricError(
                f"gold of query {query.query_id!r} not in matrix columns: "
                f"{sorted(missing)}")
        n = len(gold)
        gold_sizes.append(n)
        order = ranked_indices(pm.rows[i], key_ranks)
        top_n = [pm.article_ids[int(j)] for j in order[:n]]
        overlap = sum(1 for aid in top_n if aid in gold)
        f_values.append(overlap / n)
        entry = {"query_id": query.query_id, "n_gold": n,
                 "n_overlap": overlap, "F": overlap / n}
        for k in ks:
            top_k = [pm.article_ids[int(j)] for j in order[:k]]
            hits = sum(1 for aid in top_k if aid in gold)
            p_at_k[k].append(hits / k)
            entry[f"P@{k}"] = hits / k
        per_query.append(entry)

    score = float(np.mean(f_values))
    metrics = {"P": score, "R": score, "F_micro": score, "F_macro": score,
               "a_cs": float(np.mean(gold_sizes))}
    for k in ks:
        metrics[f"P@{k}"] = float(np.mean(p_at_k[k]))
    return {
        "protocol": "topic-driven",
        "label": label or "topic-driven",
        "n_queries": len(queries),
        "n_classes": len(pm.article_ids),
        "metrics": metrics,
        "per_query": per_query,
    }


def write_report(report: Dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def read_report(path) -> Dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "metrics" not in data or "label" not in data:
        raise MetricError(f"{path}: not a metrics report")
    return data


_FIXED_ORDER = ("P", "R", "F_micro", "F_macro")


def _metric_sort_key(name: str):
    if name in _FIXED_ORDER:
        return (0, _FIXED_ORDER.index(name), 0)
    m = re.match(r"^R@(\d+)$", name)
    if m:
        return (1, int(m.group(1)), 0)
    if name == "MRR":
        return (2, 0, 0)
    if name == "E":
        return (3, 0, 0)
    m = re.match(r"^E@(\d+)$", name)
    if m:
        return (4, int(m.group(1)), 0)
    if name == "a_cs":
        return (5, 0, 0)
    m = re.match(r"^P@(\d+)$", name)
    if m:
        return (6, int(m.group(1)), 0)
    return (7, 0, name)


def summary_table(reports: Sequence[Mapping]) -> str:
    """Join report JSONs into one CSV: rows are runs, columns are metrics."""
    if not reports:
        raise MetricError("no reports to join")
    columns: List[str] = []
    for rep in reports:
        for name in rep["metrics"]:
            if name not in columns:
                columns.append(name)
    columns.sort(key=_metric_sort_key)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run"] + columns)
    for rep in reports:
        row = [rep["label"]]
        for name in columns:
            value = rep["metrics"].get(name, "")
            row.append(str(value) if value != "" else "")
        writer.writerow(row)
    return buf.getvalue()
