"""Query-set construction for the six evaluation query types.

1: random content sentences of each article (the title never participates)
2: paraphrases of an existing set, produced by an external hook command
3: whole annotation comments   4: individual comment sentences
5: case-law decisions          6: division headings, gold = subtree articles

Query sets are JSONL; gold is always a list of article ids (a single id for
types 1-5).
"""

from __future__ import annotations

import json
import math
import random
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .corpus import Corpus, article_sort_key, normalize_text, segment_sentences


class QueryGenError(ValueError):
    """Raised for invalid query-generation requests or inputs."""


@dataclass
class Query:
    query_id: str
    qtype: int
    text: str
    gold: List[str]
    division_level: Optional[str] = None
    source_article: Optional[str] = None
    year: Optional[int] = None
    unparaphrased: bool = False

    def to_dict(self) -> Dict:
        rec: Dict = {"query_id": self.query_id, "qtype": self.qtype,
                     "text": self.text, "gold": list(self.gold)}
        if self.division_level is not None:
            rec["division_level"] = self.division_level
        if self.source_article is not None:
            rec["source_article"] = self.source_article
        if self.year is not None:
            rec["year"] = self.year
        if self.unparaphrased:
            rec["unparaphrased"] = True
        return rec


def gen_qtype1(
    corpus: Corpus,
    count: Optional[int] = None,
    rate: Optional[float] = None,
    seed: int = 0,
    clip: bool = False,
) -> List[Query]:
    """Sample content sentences per article, uniformly without replacement.

    Exactly one of ``count`` (sentences per article) and ``rate`` (fraction
    of each article's sentences, at least one) must be given.  With a fixed
    count, articles with too few sentences abort the run unless ``clip``.
    """
    if (count is None) == (rate is None):
        raise QueryGenError("give exactly one of count and rate")
    if count is not None and count < 1:
        raise QueryGenError(f"count must be >= 1, got {count}")
    if rate is not None and not 0 < rate <= 1:
        raise QueryGenError(f"rate must be in (0, 1], got {rate}")

    rng = random.Random(seed)
    queries: List[Query] = []
    shortfalls: List[str] = []
    for article in corpus.articles:
        n_avail = len(article.sentences)
        if n_avail == 0:
            shortfalls.append(f"{article.article_id}: no content sentences")
            continue
        if count is not None:
            want = count
            if want > n_avail:
                if clip:
                    want = n_avail
                else:
                    shortfalls.append(
                        f"{article.article_id}: wanted {want}, has {n_avail}")
                    continue
        else:
            want = max(1, math.floor(rate * n_avail + 0.5))
        picked = sorted(rng.sample(range(n_avail), want))
        for idx in picked:
            queries.append(Query(
                query_id=f"q1:{article.article_id}:s{idx}",
                qtype=1, text=article.sentences[idx],
                gold=[article.article_id],
                source_article=article.article_id))
    if shortfalls and not clip:
        raise QueryGenError("not enough sentences for some articles: "
                            + "; ".join(shortfalls))
    return queries


def run_paraphrase_hook(command: str, text: str,
                        timeout: Optional[float] = None) -> str:
    """Feed text to the hook on stdin and return its stdout."""
    proc = subprocess.run(
        shlex.split(command), input=text, capture_output=True,
        text=True, timeout=timeout)
    if proc.returncode != 0:
        raise QueryGenError(
            f"paraphrase hook exited {proc.returncode}: {proc.stderr.strip()}")
    out = proc.stdout.strip()
    if not out:
        raise QueryGenError("paraphrase hook produced no output")
    return out


def gen_qtype2(
    queries: Sequence[Query],
    command: str,
    max_workers: int = 4,
    timeout: Optional[float] = None,
) -> Tuple[List[Query], List[Dict]]:
    """Paraphrase every query through an external command.

    Returns the paraphrased set (input order preserved) and a skip report,
    one {"query_id", "reason"} entry per failed hook invocation.  A hook
    that returns the text unchanged keeps the query, flagged unparaphrased.
    """

    def work(query: Query):
        try:
            return run_paraphrase_hook(command, query.text, timeout=timeout)
        except (QueryGenError, OSError, subprocess.SubprocessError) as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = list(pool.map(work, queries))

    out: List[Query] = []
    skipped: List[Dict] = []
    for query, result in zip(queries, results):
        if isinstance(result, Exception):
            skipped.append({"query_id": query.query_id, "reason": str(result)})
            continue
        out.append(Query(
            query_id=f"q2:{query.query_id}", qtype=2, text=result,
            gold=list(query.gold), source_article=query.source_article,
            unparaphrased=(result == query.text)))
    return out, skipped


def _read_annotations(path, corpus: Corpus, what: str) -> List[Dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                article_id = rec["article_id"]
                text = rec["text"]
            except (KeyError, ValueError) as exc:
                raise QueryGenError(f"{path}:{lineno}: bad {what} record ({exc})")
            if not corpus.has_article(article_id):
                raise QueryGenError(
                    f"{path}:{lineno}: {what} references unknown article "
                    f"{article_id!r}")
            records.append({"article_id": article_id, "text": text,
                            "year": rec.get("year")})
    return records


def ingest_comments(path, corpus: Corpus) -> Tuple[List[Query], List[Query]]:
    """Build QType-3 (whole comments) and QType-4 (comment sentences)."""
    per_article: Dict[str, int] = {}
    q3: List[Query] = []
    q4: List[Query] = []
    for rec in _read_annotations(path, corpus, "comment"):
        aid = rec["article_id"]
        n = per_article.get(aid, 0)
        per_article[aid] = n + 1
        text = normalize_text(rec["text"])
        if not text:
            raise QueryGenError(f"comment {n} for article {aid!r} is empty")
        q3.append(Query(query_id=f"q3:{aid}:{n}", qtype=3, text=text,
                        gold=[aid], source_article=aid, year=rec["year"]))
        for j, sent in enumerate(segment_sentences(text)):
            q4.append(Query(query_id=f"q4:{aid}:{n}:{j}", qtype=4, text=sent,
                            gold=[aid], source_article=aid, year=rec["year"]))
    return q3, q4


def ingest_cases(path, corpus: Corpus) -> List[Query]:
    """Build QType-5 queries, one per case-law decision."""
    per_article: Dict[str, int] = {}
    out: List[Query] = []
    for rec in _read_annotations(path, corpus, "case"):
        aid = rec["article_id"]
        n = per_article.get(aid, 0)
        per_article[aid] = n + 1
        text = normalize_text(rec["text"])
        if not text:
            raise QueryGenError(f"case {n} for article {aid!r} is empty")
        out.append(Query(query_id=f"q5:{aid}:{n}", qtype=5, text=text,
                         gold=[aid], source_article=aid, year=rec["year"]))
    return out


def gen_qtype6(corpus: Corpus, level: str) -> List[Query]:
    """One query per division node at the given level; gold is the subtree.

    Books without that level simply contribute nothing.
    """
    queries: List[Query] = []
    for book in corpus.books:
        for node in corpus.iter_divisions(book):
            if node.level != level:
                continue
            gold = sorted(corpus.articles_under(book, node.node_id),
                          key=article_sort_key)
            if not gold:
                raise QueryGenError(
                    f"division {node.node_id!r} has no articles in its subtree")
            queries.append(Query(
                query_id=f"q6:{level}:{node.node_id}", qtype=6,
                text=node.heading, gold=gold, division_level=level))
    return queries


def write_queries(queries: Iterable[Query], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for query in queries:
            fh.write(json.dumps(query.to_dict()) + "\n")
            n += 1
    return n


def read_queries(path) -> List[Query]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(Query(
                    query_id=rec["query_id"], qtype=rec["qtype"],
                    text=rec["text"], gold=list(rec["gold"]),
                    division_level=rec.get("division_level"),
                    source_article=rec.get("source_article"),
                    year=rec.get("year"),
                    unparaphrased=rec.get("unparaphrased", False)))
            except (KeyError, ValueError) as exc:
                raise QueryGenError(f"{path}:{lineno}: bad query record ({exc})")
    return out


def write_skip_report(skipped: Sequence[Dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in skipped:
            fh.write(json.dumps(rec) + "\n")
