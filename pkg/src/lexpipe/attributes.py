"""Boolean division-membership attributes for the articles of one book.

Every distinct division heading in the book becomes one attribute, numbered
by first occurrence in the depth-first document order.  Repeated headings
(generic ones like 'disposizioni generali') share a single attribute, so an
article's vector has bit i set when any division on its path carries the
i-th heading.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .corpus import Article, Corpus, article_sort_key


class AttributeError_(ValueError):
    """Raised for schema/article mismatches."""


@dataclass
class AttributeSchema:
    book: int
    headings: List[str]          # attribute order; index i -> attribute i+1
    first_division: List[str]    # first node carrying each heading

    @property
    def size(self) -> int:
        return len(self.headings)

    def attribute_of(self, heading: str) -> int:
        """1-based attribute id for a heading."""
        try:
            return self.headings.index(heading) + 1
        except ValueError:
            raise AttributeError_(f"heading {heading!r} is not in the schema")

    def to_dict(self) -> Dict:
        return {
            "book": self.book,
            "n_attributes": self.size,
            "attributes": [
                {"attribute_id": i + 1, "division_id": self.first_division[i],
                 "heading": self.headings[i]}
                for i in range(self.size)
            ],
        }


def build_attribute_schema(corpus: Corpus, book: int) -> AttributeSchema:
    if book not in corpus.books:
        raise AttributeError_(f"corpus has no book {book}")
    headings: List[str] = []
    first: List[str] = []
    seen: Dict[str, int] = {}
    for node in corpus.iter_divisions(book):
        if node.heading not in seen:
            seen[node.heading] = len(headings)
            headings.append(node.heading)
            first.append(node.node_id)
    return AttributeSchema(book=book, headings=headings, first_division=first)


def article_attribute_vector(schema: AttributeSchema, corpus: Corpus,
                             article: Article) -> List[int]:
    """0/1 vector over the schema for one article's division path."""
    if article.book != schema.book:
        raise AttributeError_(
            f"article {article.article_id!r} is in book {article.book}, "
            f"schema covers book {schema.book}")
    bits = [0] * schema.size
    for node_id in corpus.division_path(article):
        heading = corpus.node(article.book, node_id).heading
        bits[schema.attribute_of(heading) - 1] = 1
    return bits


def attribute_vectors(schema: AttributeSchema, corpus: Corpus) -> List[tuple]:
    """(article_id, bits) for every article of the schema's book, ascending id."""
    articles = sorted((a for a in corpus.articles if a.book == schema.book),
                      key=lambda a: article_sort_key(a.article_id))
    if not articles:
        raise AttributeError_(f"book {schema.book} has no articles")
    return [(a.article_id, article_attribute_vector(schema, corpus, a))
            for a in articles]


def write_schema(schema: AttributeSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def write_vectors(rows: Sequence[tuple], size: int, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("article_id," + ",".join(f"a{i+1}" for i in range(size)) + "\n")
        for article_id, bits in rows:
            fh.write(article_id + "," + ",".join(str(b) for b in bits) + "\n")


def read_vectors(path) -> List[tuple]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "article_id":
            raise AttributeError_(f"{path}: bad attribute vector header")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise AttributeError_(f"{path}:{lineno}: wrong field count")
            try:
                bits = [int(x) for x in rec[1:]]
            except ValueError as exc:
                raise AttributeError_(f"{path}:{lineno}: {exc}") from None
            if any(b not in (0, 1) for b in bits):
                raise AttributeError_(f"{path}:{lineno}: bits must be 0 or 1")
            out.append((rec[0], bits))
    return out
