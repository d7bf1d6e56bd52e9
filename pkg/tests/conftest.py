import pytest

import corpusgen


@pytest.fixture
def small_corpus():
    books = [{
        "book": 1,
        "divisions": [
            corpusgen.division("c1", "chapter", "Delle persone", ["sc1"]),
            corpusgen.division("sc1", "subchapter", "Della capacita"),
            corpusgen.division("c2", "chapter", "Dei beni"),
        ],
        "articles": [
            corpusgen.article(
                "1", "Capacita giuridica",
                content="La capacita giuridica si acquista dal momento della "
                        "nascita. I diritti sono subordinati alla nascita.",
                division_id="sc1"),
            corpusgen.article(
                "2", "Maggiore eta",
                content="La maggiore eta e fissata al compimento degli anni. "
                        "Con la maggiore eta si acquista la capacita; salvo "
                        "eccezioni stabilite da leggi speciali.",
                division_id="sc1"),
            corpusgen.article(
                "3", "Dei beni in generale",
                content="Sono beni le cose che possono formare oggetto di "
                        "diritti.",
                division_id="c2"),
            corpusgen.article(
                "3-bis", "Beni immobili",
                content="Sono beni immobili il suolo e le sorgenti; i corsi "
                        "di acqua. Gli alberi sono beni immobili.",
                division_id="c2"),
        ],
    }]
    return corpusgen.build(books)


@pytest.fixture
def example_tree_corpus():
    return corpusgen.example_tree_corpus()


@pytest.fixture
def disjoint20():
    return corpusgen.disjoint_corpus(n_articles=20, seed=7)
