"""Selection of domain terms to graft onto a pretrained subword vocabulary.

Candidate terms come from the normalized article texts (title plus
sentences).  A term survives when it is not a stopword, is not spread over
more than ``df_ceiling`` of the articles, and occurs more than once in the
whole scope.  Whatever is left after subtracting the base vocabulary is the
injection set.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Set

from .corpus import Corpus, tokenize


class VocabError(ValueError):
    """Raised for malformed vocabulary inputs."""


@dataclass
class InjectionReport:
    scope: str
    n_articles: int
    n_candidates: int
    base_vocab_size: int
    terms: List[str]

    @property
    def n_injected(self) -> int:
        return len(self.terms)

    @property
    def final_vocab_size(self) -> int:
        return self.base_vocab_size + len(self.terms)

    def to_dict(self) -> Dict:
        return {
            "scope": self.scope,
            "n_articles": self.n_articles,
            "n_candidates": self.n_candidates,
            "n_injected": self.n_injected,
            "base_vocab_size": self.base_vocab_size,
            "final_vocab_size": self.final_vocab_size,
            "terms": list(self.terms),
        }


def load_wordlist(path) -> List[str]:
    """One token per line; blank lines ignored, order preserved."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token:
                out.append(token)
    return out


def default_stopwords() -> List[str]:
    text = resources.files("lexpipe").joinpath("data/stopwords_it.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def surface_form(token: str) -> str:
    """Strip the subword continuation marker: '##ato' -> 'ato'."""
    return token[2:] if token.startswith("##") else token


def select_injection_terms(
    corpus: Corpus,
    base_vocab: Sequence[str],
    stopwords: Optional[Iterable[str]] = None,
    df_ceiling: float = 0.5,
) -> InjectionReport:
    """Pick corpus terms worth adding to the base vocabulary.

    Args:
        corpus: scope to draw terms from.
        base_vocab: existing vocabulary tokens (may carry '##' markers).
        stopwords: words to exclude; defaults to the packaged Italian list.
        df_ceiling: drop terms present in more than this fraction of articles.

    Returns:
        InjectionReport with the sorted injected terms.
    """
    if not 0 < df_ceiling <= 1:
        raise VocabError(f"df_ceiling must be in (0, 1], got {df_ceiling}")
    stop: Set[str] = set(default_stopwords() if stopwords is None else stopwords)

    doc_freq: Counter = Counter()
    total_freq: Counter = Counter()
    for article in corpus.articles:
        tokens = tokenize(" ".join([article.title] + article.sentences))
        total_freq.update(tokens)
        doc_freq.update(set(tokens))

    n_articles = len(corpus.articles)
    max_df = df_ceiling * n_articles
    candidates = {
        term for term, df in doc_freq.items()
        if term not in stop and df <= max_df and total_freq[term] >= 2
    }

    base_surfaces = {surface_form(t) for t in base_vocab}
    injected = sorted(candidates - base_surfaces)
    return InjectionReport(
        scope=corpus.scope_tag,
        n_articles=n_articles,
        n_candidates=len(candidates),
        base_vocab_size=len(base_vocab),
        terms=injected,
    )


def extended_vocab(base_vocab: Sequence[str], report: InjectionReport) -> List[str]:
    """Base vocabulary with the injected terms appended."""
    return list(base_vocab) + list(report.terms)


def write_report(report: InjectionReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def read_report(path) -> InjectionReport:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        return InjectionReport(
            scope=data["scope"],
            n_articles=data["n_articles"],
            n_candidates=data["n_candidates"],
            base_vocab_size=data["base_vocab_size"],
            terms=list(data["terms"]),
        )
    except KeyError as exc:
        raise VocabError(f"injection report missing field {exc}") from None
