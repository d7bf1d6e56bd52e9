"""Unsupervised training-set generation by round-robin sentence blocks.

Each article yields a block of text units under a scheme, and the block is
replicated whole until at least ``min_tu`` units exist.  For n-gram schemes
the block is built over the sequence S = [title, s1, ..., sL]; a sequence
shorter than the window collapses to the single unit join(S).

The ``*-empht`` variants emphasize the title: units come in two subsets,
first exactly max(L, multiplier * mean_sentences) units cycled from a block
built over the content sentences alone, then (min_tu - multiplier *
mean_sentences) replicas of the title.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence

from .corpus import Article, Corpus, article_sort_key, scope_file_tag


class LabelingError(ValueError):
    """Raised for invalid labeling configs or unlabelable articles."""


SCHEMES: Sequence[str] = (
    "title-rr",
    "uni-rr",
    "bi-rr",
    "tri-rr",
    "cas-rr",
    "triangle-rr",
    "uni-rr-empht",
    "cas-rr-empht",
    "triangle-rr-empht",
)

EMPHT_SCHEMES = frozenset(s for s in SCHEMES if s.endswith("-empht"))


@dataclass(frozen=True)
class LabelingConfig:
    scheme: str
    min_tu: int = 32
    multiplier: int = 4
    mean_sentences: int = 4

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise LabelingError(f"unknown scheme {self.scheme!r}")
        if self.min_tu < 1:
            raise LabelingError(f"min_tu must be >= 1, got {self.min_tu}")
        if self.scheme in EMPHT_SCHEMES:
            if self.multiplier < 1 or self.mean_sentences < 1:
                raise LabelingError("multiplier and mean_sentences must be >= 1")
            if self.multiplier * self.mean_sentences >= self.min_tu:
                raise LabelingError(
                    f"scheme {self.scheme}: multiplier * mean_sentences "
                    f"({self.multiplier * self.mean_sentences}) must be "
                    f"< min_tu ({self.min_tu})")


@dataclass
class TrainingUnit:
    article_id: str
    book: int
    scheme: str
    replica: int
    block_index: int
    text: str


def ngram_units(elements: Sequence[str], n: int) -> List[str]:
    """Joined windows of n consecutive elements, stride 1.

    Fewer than n elements collapse to the single unit join(elements).
    """
    if len(elements) < n:
        return [" ".join(elements)]
    return [" ".join(elements[i:i + n]) for i in range(len(elements) - n + 1)]


def cascade_units(elements: Sequence[str]) -> List[str]:
    """The prefixes join(e1), join(e1 e2), ..., join(e1..ek)."""
    return [" ".join(elements[:i + 1]) for i in range(len(elements))]


def triangle_units(elements: Sequence[str]) -> List[str]:
    return (ngram_units(elements, 1)
            + ngram_units(elements, 2)
            + ngram_units(elements, 3))


def build_block(article: Article, scheme: str) -> List[str]:
    """The per-article unit block that round-robin replication cycles over."""
    if scheme == "title-rr":
        if not article.title:
            raise LabelingError(f"article {article.article_id!r} has no title")
        return [article.title]

    if scheme in EMPHT_SCHEMES:
        base: Sequence[str] = article.sentences
        if not base:
            if not article.title:
                raise LabelingError(
                    f"article {article.article_id!r} has neither sentences nor title")
            # No content to emphasize against: fall back to the title.
            base = [article.title]
    else:
        if not article.title and not article.sentences:
            raise LabelingError(
                f"article {article.article_id!r} has neither sentences nor title")
        base = [article.title] + list(article.sentences)

    kind = scheme.replace("-empht", "")
    if kind == "uni-rr":
        return ngram_units(base, 1)
    if kind == "bi-rr":
        return ngram_units(base, 2)
    if kind == "tri-rr":
        return ngram_units(base, 3)
    if kind == "cas-rr":
        return cascade_units(base)
    if kind == "triangle-rr":
        return triangle_units(base)
    raise LabelingError(f"unknown scheme {scheme!r}")


def generate_units(article: Article, config: LabelingConfig) -> List[TrainingUnit]:
    """All training units for one article, in emission order."""
    block = build_block(article, config.scheme)
    units: List[TrainingUnit] = []

    def emit(text: str, replica: int, block_index: int) -> None:
        units.append(TrainingUnit(
            article_id=article.article_id, book=article.book,
            scheme=config.scheme, replica=replica,
            block_index=block_index, text=text))

    if config.scheme in EMPHT_SCHEMES:
        if not article.title:
            raise LabelingError(f"article {article.article_id!r} has no title")
        emphasis = config.multiplier * config.mean_sentences
        first = max(len(article.sentences), emphasis)
        for i in range(first):
            emit(block[i % len(block)], i // len(block), i % len(block))
        # Title replicas form their own single-element block.
        for j in range(config.min_tu - emphasis):
            emit(article.title, j, 0)
    else:
        replicas = -(-config.min_tu // len(block))
        for r in range(replicas):
            for b, text in enumerate(block):
                emit(text, r, b)
    return units


def generate_training_set(corpus: Corpus,
                          config: LabelingConfig) -> Iterator[TrainingUnit]:
    """Units for every article in the scope, grouped by ascending article id."""
    for article in sorted(corpus.articles,
                          key=lambda a: article_sort_key(a.article_id)):
        yield from generate_units(article, config)


def training_filename(scope_tag: str, scheme: str, min_tu: int) -> str:
    return f"{scope_file_tag(scope_tag)}_{scheme}_tu{min_tu}.jsonl"


def unit_to_dict(unit: TrainingUnit) -> dict:
    return {
        "article_id": unit.article_id,
        "book": unit.book,
        "scheme": unit.scheme,
        "replica": unit.replica,
        "block_index": unit.block_index,
        "text": unit.text,
    }


def write_training_set(units: Iterable[TrainingUnit], path) -> int:
    """Stream units to JSONL; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for unit in units:
            fh.write(json.dumps(unit_to_dict(unit)) + "\n")
            n += 1
    return n


def read_training_set(path) -> List[TrainingUnit]:
    units = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                units.append(TrainingUnit(
                    article_id=rec["article_id"], book=rec["book"],
                    scheme=rec["scheme"], replica=rec["replica"],
                    block_index=rec["block_index"], text=rec["text"]))
            except (KeyError, ValueError) as exc:
                raise LabelingError(f"{path}:{lineno}: bad training unit ({exc})")
    return units
