"""Extra checks that only run against the real corpus files.

Set LEXPIPE_ICC_CORPUS to the normalized corpus JSON to enable them;
without it the module skips.  Everything here is structural (counts,
shapes, idempotence), quality numbers live in the evaluation reports.
"""

import json
import os

import pytest

from lexpipe.attributes import attribute_vectors, build_attribute_schema
from lexpipe.corpus import load_corpus, parse_corpus, serialize_corpus
from lexpipe.querygen import gen_qtype1, gen_qtype6

ICC_ENV = "LEXPIPE_ICC_CORPUS"

pytestmark = pytest.mark.skipif(
    not os.environ.get(ICC_ENV),
    reason=f"set {ICC_ENV} to the corpus JSON to run real-corpus checks")


@pytest.fixture(scope="module")
def corpus():
    return load_corpus(os.environ[ICC_ENV])


class TestRealCorpus:
    def test_book1_two_queries_per_article(self, corpus):
        book1 = corpus.for_book(1)
        queries = gen_qtype1(book1, count=2, seed=0)
        assert len(queries) == 2 * 395

    def test_reparse_is_idempotent(self, corpus):
        data = serialize_corpus(corpus)
        again = serialize_corpus(parse_corpus(json.loads(json.dumps(data))))
        assert again == data

    def test_every_article_has_division_coverage(self, corpus):
        for book in corpus.books:
            schema = build_attribute_schema(corpus, book)
            for article_id, bits in attribute_vectors(schema, corpus):
                assert sum(bits) >= 1, (book, article_id)

    def test_chapter_queries_cover_each_book(self, corpus):
        for book in corpus.books:
            queries = gen_qtype6(corpus.for_book(book), "chapter")
            assert queries, book
            covered = set()
            for q in queries:
                assert q.gold, q.query_id
                covered.update(q.gold)
            assert covered <= set(corpus.for_book(book).article_ids())
