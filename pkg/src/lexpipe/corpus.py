"""Corpus model for a statute code: normalization, segmentation, parsing, stats.

The corpus file is JSON with the shape

    {"books": [{"book": 1,
                "divisions": [{"id": "...", "level": "chapter",
                               "heading": "...", "children": ["..."]}, ...],
                "articles": [{"id": "...", "title": "...",
                              "content": "..." | "sentences": [...],
                              "division": "..."}, ...]}, ...]}

Article text may arrive raw (``content``) or already normalized and
segmented (``sentences``).  Normalization is idempotent, so parsing a
serialized corpus reproduces it exactly.
"""

from __future__ import annotations

import json
import math
import re
import statistics
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence


class CorpusError(ValueError):
    """Raised when a corpus file violates the schema or its invariants."""


# Abbreviations are replaced on token boundaries before digits are dropped,
# so "art. 5" becomes "articolo".
DEFAULT_ABBREVIATIONS: Dict[str, str] = {
    "art.": "articolo",
    "d.lgs.": "decreto legislativo",
    "g.u.": "gazzetta ufficiale",
}

ITALIAN_MONTHS: Sequence[str] = (
    "gennaio", "febbraio", "marzo", "aprile", "maggio", "giugno",
    "luglio", "agosto", "settembre", "ottobre", "novembre", "dicembre",
)

DIVISION_LEVELS: Sequence[str] = ("chapter", "subchapter", "section", "paragraph")
_LEVEL_RANK = {level: i for i, level in enumerate(DIVISION_LEVELS)}

_SENTENCE_SPLIT = re.compile(r"[.;?!]")
_WHITESPACE = re.compile(r"\s+")
_TOKEN = re.compile(r"[a-z]+")

# Ordinal suffixes used by article ids such as "456-bis".
_LATIN_SUFFIXES = (
    "bis", "ter", "quater", "quinquies", "sexies", "septies",
    "octies", "novies", "decies", "undecies", "duodecies",
    "terdecies", "quaterdecies",
)
_SUFFIX_RANK = {s: i + 1 for i, s in enumerate(_LATIN_SUFFIXES)}
_ARTICLE_ID = re.compile(r"^(\d+)(?:-([a-z]+))?$")


def _boundary_pattern(token: str) -> re.Pattern:
    # Token boundaries are letter boundaries: "art." must not match inside
    # "particolare".
    return re.compile(r"(?<![a-z])" + re.escape(token) + r"(?![a-z])")


def normalize_text(
    text: str,
    abbreviations: Optional[Mapping[str, str]] = None,
    months: Optional[Sequence[str]] = None,
) -> str:
    """Lowercase, expand abbreviations, drop digits/month names/accents.

    Sentence punctuation survives so the result can still be segmented.
    The function is idempotent.
    """
    abbrev = DEFAULT_ABBREVIATIONS if abbreviations is None else abbreviations
    month_list = ITALIAN_MONTHS if months is None else months

    out = text.lower()
    for short in sorted(abbrev, key=len, reverse=True):
        out = _boundary_pattern(short).sub(abbrev[short], out)
    for month in month_list:
        out = _boundary_pattern(month).sub(" ", out)
    # NFKD first so compatibility forms (superscripts, fractions) become
    # plain digits and get dropped with the rest.
    out = unicodedata.normalize("NFKD", out)
    out = "".join(ch for ch in out if not unicodedata.combining(ch))
    out = "".join(ch for ch in out if ord(ch) < 128)
    out = re.sub(r"[0-9]", "", out)
    return _WHITESPACE.sub(" ", out).strip()


def segment_sentences(text: str) -> List[str]:
    """Split normalized text on . ; ? ! and drop empty fragments."""
    parts = [p.strip() for p in _SENTENCE_SPLIT.split(text)]
    return [p for p in parts if p]


def tokenize(text: str) -> List[str]:
    """Alphabetic runs of a normalized string; apostrophes split tokens."""
    return _TOKEN.findall(text)


def article_sort_key(article_id: str):
    """Sort key for article ids: numeric part, then Latin ordinal suffix.

    Ids that do not look like statute numbers sort after numeric ones,
    lexicographically.
    """
    m = _ARTICLE_ID.match(article_id)
    if not m:
        return (1, 0, article_id, 0, "")
    number = int(m.group(1))
    suffix = m.group(2) or ""
    rank = _SUFFIX_RANK.get(suffix, 0 if suffix == "" else len(_LATIN_SUFFIXES) + 1)
    return (0, number, "", rank, suffix)


def parse_scope(scope: str) -> Optional[int]:
    """'all' -> None, 'book:N' -> N."""
    if scope == "all":
        return None
    m = re.match(r"^book:(\d+)$", scope)
    if not m:
        raise CorpusError(f"bad scope {scope!r}: expected 'all' or 'book:N'")
    return int(m.group(1))


def scope_file_tag(scope_tag: str) -> str:
    """Filename-safe form of a scope tag ('book:2' -> 'book2')."""
    return scope_tag.replace(":", "")


@dataclass
class DivisionNode:
    node_id: str
    book: int
    level: str
    heading: str
    children: List[str] = field(default_factory=list)
    parent: Optional[str] = None


@dataclass
class Article:
    article_id: str
    book: int
    title: str
    sentences: List[str]
    division_id: str


@dataclass
class Corpus:
    scope_tag: str
    books: List[int]
    # divisions and document-order roots are kept per book; ids are only
    # required to be unique within their book
    divisions: Dict[int, Dict[str, DivisionNode]]
    roots: Dict[int, List[str]]
    articles: List[Article]

    def __post_init__(self) -> None:
        self._by_id = {a.article_id: a for a in self.articles}

    def article(self, article_id: str) -> Article:
        try:
            return self._by_id[article_id]
        except KeyError:
            raise CorpusError(f"unknown article id {article_id!r}") from None

    def has_article(self, article_id: str) -> bool:
        return article_id in self._by_id

    def article_ids(self) -> List[str]:
        return [a.article_id for a in self.articles]

    def node(self, book: int, node_id: str) -> DivisionNode:
        try:
            return self.divisions[book][node_id]
        except KeyError:
            raise CorpusError(f"unknown division {node_id!r} in book {book}") from None

    def division_path(self, article: Article) -> List[str]:
        """Division ids from the root chapter down to the terminal division."""
        path = []
        node_id: Optional[str] = article.division_id
        while node_id is not None:
            path.append(node_id)
            node_id = self.node(article.book, node_id).parent
        path.reverse()
        return path

    def iter_divisions(self, book: int) -> Iterator[DivisionNode]:
        """Depth-first pre-order walk in document order."""
        nodes = self.divisions.get(book, {})
        stack = list(reversed(self.roots.get(book, [])))
        while stack:
            node = nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def subtree_ids(self, book: int, node_id: str) -> List[str]:
        self.node(book, node_id)
        ids = []
        stack = [node_id]
        while stack:
            cur = stack.pop()
            ids.append(cur)
            stack.extend(reversed(self.node(book, cur).children))
        return ids

    def articles_under(self, book: int, node_id: str) -> List[str]:
        wanted = set(self.subtree_ids(book, node_id))
        return [a.article_id for a in self.articles
                if a.book == book and a.division_id in wanted]

    def for_book(self, book: int) -> "Corpus":
        if book not in self.books:
            raise CorpusError(f"corpus has no book {book}")
        return Corpus(
            scope_tag=f"book:{book}",
            books=[book],
            divisions={book: self.divisions[book]},
            roots={book: self.roots[book]},
            articles=[a for a in self.articles if a.book == book],
        )

    def scoped(self, scope: str) -> "Corpus":
        book = parse_scope(scope)
        return self if book is None else self.for_book(book)


def _parse_division_entries(book: int, entries: Sequence[Mapping]) -> tuple:
    nodes: Dict[str, DivisionNode] = {}
    order: List[str] = []
    for entry in entries:
        node_id = entry.get("id")
        if not node_id or not isinstance(node_id, str):
            raise CorpusError(f"book {book}: division without a string id")
        if node_id in nodes:
            raise CorpusError(f"book {book}: duplicate division id {node_id!r}")
        level = entry.get("level")
        if level not in _LEVEL_RANK:
            raise CorpusError(
                f"book {book}: division {node_id!r} has bad level {level!r}")
        heading = normalize_text(str(entry.get("heading", "")))
        if not heading:
            raise CorpusError(f"book {book}: division {node_id!r} has an empty heading")
        children = list(entry.get("children", []))
        nodes[node_id] = DivisionNode(node_id=node_id, book=book, level=level,
                                      heading=heading, children=children)
        order.append(node_id)

    for node in nodes.values():
        for child_id in node.children:
            if child_id not in nodes:
                raise CorpusError(
                    f"book {book}: division {node.node_id!r} references "
                    f"missing child {child_id!r}")
            child = nodes[child_id]
            if child.parent is not None:
                raise CorpusError(
                    f"book {book}: division {child_id!r} has two parents")
            if _LEVEL_RANK[child.level] <= _LEVEL_RANK[node.level]:
                raise CorpusError(
                    f"book {book}: division {child_id!r} ({child.level}) does "
                    f"not nest under {node.node_id!r} ({node.level})")
            child.parent = node.node_id

    roots = [nid for nid in order if nodes[nid].parent is None]
    for root_id in roots:
        if nodes[root_id].level != "chapter":
            raise CorpusError(
                f"book {book}: top-level division {root_id!r} is not a chapter")

    seen = set()
    stack = list(roots)
    while stack:
        cur = stack.pop()
        seen.add(cur)
        stack.extend(nodes[cur].children)
    missing = [nid for nid in order if nid not in seen]
    if missing:
        raise CorpusError(f"book {book}: unreachable divisions {missing}")

    return nodes, roots


def _parse_article_entry(book: int, entry: Mapping,
                         nodes: Mapping[str, DivisionNode]) -> Article:
    article_id = entry.get("id")
    if not article_id or not isinstance(article_id, str):
        raise CorpusError(f"book {book}: article without a string id")
    title = normalize_text(str(entry.get("title", "")))
    if not title:
        raise CorpusError(f"article {article_id!r}: empty title after normalization")
    if "sentences" in entry:
        sentences = []
        for s in entry["sentences"]:
            sentences.extend(segment_sentences(normalize_text(str(s))))
    else:
        sentences = segment_sentences(normalize_text(str(entry.get("content", ""))))
    division_id = entry.get("division")
    if division_id not in nodes:
        raise CorpusError(
            f"article {article_id!r}: unknown division {division_id!r} in book {book}")
    return Article(article_id=article_id, book=book, title=title,
                   sentences=sentences, division_id=division_id)


def parse_corpus(data: Mapping) -> Corpus:
    """Validate a corpus dict and return the normalized Corpus."""
    if not isinstance(data, Mapping) or "books" not in data:
        raise CorpusError("corpus file must be an object with a 'books' list")
    books_in = data["books"]
    if not books_in:
        raise CorpusError("corpus has no books")

    books: List[int] = []
    divisions: Dict[int, Dict[str, DivisionNode]] = {}
    roots: Dict[int, List[str]] = {}
    articles: List[Article] = []

    for book_entry in books_in:
        book = book_entry.get("book")
        if not isinstance(book, int) or not 1 <= book <= 6:
            raise CorpusError(f"bad book number {book!r}: expected integer in 1..6")
        if book in divisions:
            raise CorpusError(f"book {book} appears twice")
        nodes, book_roots = _parse_division_entries(
            book, book_entry.get("divisions", []))
        if not nodes:
            raise CorpusError(f"book {book} has no divisions")
        book_articles = [
            _parse_article_entry(book, e, nodes)
            for e in book_entry.get("articles", [])
        ]
        if not book_articles:
            raise CorpusError(f"book {book} has no articles")

        populated = {a.division_id for a in book_articles}
        for node in nodes.values():
            if not node.children and node.node_id not in populated:
                raise CorpusError(
                    f"book {book}: leaf division {node.node_id!r} has no articles")

        books.append(book)
        divisions[book] = nodes
        roots[book] = book_roots
        articles.extend(book_articles)

    seen_ids: set = set()
    for a in articles:
        if a.article_id in seen_ids:
            raise CorpusError(f"duplicate article id {a.article_id!r}")
        seen_ids.add(a.article_id)

    books.sort()
    articles.sort(key=lambda a: (a.book, article_sort_key(a.article_id)))
    scope_tag = "all" if len(books) > 1 else f"book:{books[0]}"
    return Corpus(scope_tag=scope_tag, books=books, divisions=divisions,
                  roots=roots, articles=articles)


def load_corpus(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(json.load(fh))


def serialize_corpus(corpus: Corpus) -> Dict:
    """Inverse of parse_corpus: parse(serialize(c)) reproduces c."""
    out_books = []
    for book in corpus.books:
        nodes = corpus.divisions[book]
        div_entries = [
            {"id": n.node_id, "level": n.level, "heading": n.heading,
             "children": list(n.children)}
            for n in corpus.iter_divisions(book)
        ]
        art_entries = [
            {"id": a.article_id, "title": a.title,
             "sentences": list(a.sentences), "division": a.division_id}
            for a in corpus.articles if a.book == book
        ]
        out_books.append({"book": book, "divisions": div_entries,
                          "articles": art_entries})
    return {"books": out_books}


STATS_COLUMNS = (
    "portion", "articles",
    "sent_total", "sent_min", "sent_max", "sent_mean", "sent_std",
    "word_total", "word_min", "word_max", "word_mean", "word_std",
)


def _stats_row(label: str, articles: Sequence[Article]) -> Dict[str, object]:
    # The title line counts as one sentence; words are whitespace tokens of
    # the normalized title plus sentences.
    sent_counts = [1 + len(a.sentences) for a in articles]
    word_counts = [
        len(a.title.split()) + sum(len(s.split()) for s in a.sentences)
        for a in articles
    ]
    return {
        "portion": label,
        "articles": len(articles),
        "sent_total": sum(sent_counts),
        "sent_min": min(sent_counts),
        "sent_max": max(sent_counts),
        "sent_mean": statistics.fmean(sent_counts),
        "sent_std": statistics.pstdev(sent_counts),
        "word_total": sum(word_counts),
        "word_min": min(word_counts),
        "word_max": max(word_counts),
        "word_mean": statistics.fmean(word_counts),
        "word_std": statistics.pstdev(word_counts),
    }


def corpus_stats(corpus: Corpus) -> List[Dict[str, object]]:
    """Per-book rows plus an 'all' row, in the fixed STATS_COLUMNS layout."""
    rows = []
    for book in corpus.books:
        rows.append(_stats_row(f"book-{book}",
                               [a for a in corpus.articles if a.book == book]))
    rows.append(_stats_row("all", corpus.articles))
    return rows


def stats_to_csv(rows: Sequence[Mapping[str, object]]) -> str:
    lines = [",".join(STATS_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in STATS_COLUMNS))
    return "\n".join(lines) + "\n"
