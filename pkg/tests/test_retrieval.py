import random
from typing import List, Sequence

import numpy as np
import pytest

from querybot.catalog.indexer import build_value_index
from querybot.catalog.models import ColumnSchema, DatabaseCatalog, DescriptionEntry, TableSchema
from querybot.clients.embedder import Embedder, HashingEmbedder
from querybot.errors import ConsistencyError, EmbedderUnavailableError
from querybot.retrieval.models import RetrievalCandidate, RetrievedEntities
from querybot.retrieval.reranker import LexicalReranker, Reranker, edit_similarity, levenshtein
from querybot.retrieval.retriever import (
    EntityRetriever,
    assemble_entities,
    rerank,
    retrieve_columns,
    retrieve_descriptions,
    retrieve_values,
)
from querybot.retrieval.scorers import Bm25Scorer, MinHashScorer, make_scorer
from querybot.retrieval.vector_store import EmbeddingCache, VectorStore, embed_cached

WORDS = ["school", "county", "city", "phone", "zip", "name", "date", "meal", "count", "charter",
         "street", "district", "grade", "score", "enrollment", "code", "type", "status"]
VALUE_WORDS = ["Alameda", "Fresno", "Berkeley", "Lincoln", "Roosevelt", "Mission", "Oak", "Pine",
               "Rue Lepic", "SuperSport Park", "Centurion", "Main St"]
NUMBERS = ["500", "5000", "50", "1.5", "12", "2000"]


def random_catalog(rng: random.Random, db_id: str = "generated") -> DatabaseCatalog:
    tables = []
    for t in range(rng.randint(1, 4)):
        names = rng.sample(WORDS, rng.randint(2, 6))
        columns = []
        for name in names:
            pool = NUMBERS if rng.random() < 0.3 else VALUE_WORDS
            values = sorted(set(rng.sample(pool, rng.randint(0, min(5, len(pool))))))
            columns.append(ColumnSchema(name=name.title(), kind="numeric" if pool is NUMBERS else "text",
                                        sample_values=values))
        tables.append(TableSchema(name=f"table_{t}", columns=columns))
    catalog = DatabaseCatalog(db_id=db_id, tables=tables)
    return catalog.with_index(build_value_index(catalog, 128, rng.randint(0, 1000)))


def value_count(catalog: DatabaseCatalog) -> int:
    return sum(len(c.sample_values) for t in catalog.tables for c in t.columns)


class CountingEmbedder(Embedder):
    def __init__(self):
        self.inner = HashingEmbedder(64)
        self.model_id = "counting-64"
        self.seen: List[str] = []

    async def embed(self, texts: Sequence[str]) -> List[List[float]]:
        self.seen.extend(texts)
        return await self.inner.embed(texts)


class BrokenEmbedder(Embedder):
    model_id = "counting-64"

    async def embed(self, texts):
        raise RuntimeError("service down")


class BrokenReranker(Reranker):
    model_id = "broken"

    async def score(self, query, documents):
        raise RuntimeError("reranker down")


# ── First-stage rules ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("scorer_name", ["minhash", "bm25"])
def test_columns_are_positive_and_at_most_five(scorer_name):
    rng = random.Random(7)
    for _ in range(40):
        catalog = random_catalog(rng)
        scorer = make_scorer(scorer_name, catalog, catalog.value_index)
        keyword = rng.choice(WORDS + VALUE_WORDS + ["phone numbers", "school name"])
        hits = retrieve_columns(keyword, catalog, scorer)
        assert len(hits) <= 5
        assert all(h.score > 0 for h in hits)
        assert hits == sorted(hits, key=RetrievalCandidate.sort_key)
        assert all(catalog.has_column(h.table, h.column) for h in hits)


def test_numeric_keywords_only_match_exactly():
    rng = random.Random(11)
    for _ in range(40):
        catalog = random_catalog(rng)
        keyword = rng.choice(NUMBERS + ["+500.0", "0050"])
        hits = retrieve_values(keyword, catalog.value_index, catalog)
        canonical = {"+500.0": "500", "0050": "50"}.get(keyword, keyword)
        expected = sum(v == canonical for t in catalog.tables for c in t.columns for v in c.sample_values)
        assert all(h.payload == canonical for h in hits)
        assert len(hits) == min(5, expected)


@pytest.mark.parametrize("scorer_name", ["minhash", "bm25"])
def test_mixed_keywords_take_top_five_without_threshold(scorer_name):
    rng = random.Random(13)
    for _ in range(40):
        catalog = random_catalog(rng)
        scorer = make_scorer(scorer_name, catalog, catalog.value_index)
        keyword = rng.choice(["2000/1/1", "Rue Lepic", "zzzz", "A12-b", "Centurion"])
        hits = retrieve_values(keyword, catalog.value_index, catalog, scorer)
        assert len(hits) == min(5, value_count(catalog))


async def test_rerank_keeps_two_from_its_input():
    rng = random.Random(17)
    reranker = LexicalReranker()
    for _ in range(40):
        catalog = random_catalog(rng)
        keyword = rng.choice(VALUE_WORDS)
        first = retrieve_values(keyword, catalog.value_index, catalog)
        kept = await rerank(keyword, first, reranker)
        assert len(kept) <= 2
        assert all(k in first for k in kept)


def test_phone_numbers_finds_phone_column():
    catalog = DatabaseCatalog(db_id="s", tables=[TableSchema(name="schools", columns=[
        ColumnSchema(name=n) for n in ["CDSCode", "School", "Phone", "County", "Zip", "OpenDate", "Website"]
    ])])
    hits = retrieve_columns("phone numbers", catalog, MinHashScorer(catalog))
    assert ("schools", "Phone") in [(h.table, h.column) for h in hits]


def test_scorers_share_one_interface(schools_catalog):
    for scorer in (MinHashScorer(schools_catalog), Bm25Scorer(schools_catalog)):
        assert len(scorer.score_columns("county")) == len(schools_catalog.qualified_columns())
        assert len(scorer.score_values("Alameda")) == value_count(schools_catalog)


def test_unknown_scorer(schools_catalog):
    with pytest.raises(ValueError):
        make_scorer("tfidf", schools_catalog)


# ── Second stage ──────────────────────────────────────────────────────────────

async def test_rerank_prefers_closest_text():
    candidates = [
        RetrievalCandidate(kind="value", table="t", column="c", payload=p, score=0.5)
        for p in ["Alameda High", "Alameda", "Fresno"]
    ]
    kept = await rerank("alameda", candidates, LexicalReranker())
    assert [k.payload for k in kept] == ["Alameda", "Alameda High"]


async def test_rerank_falls_back_to_first_stage_order():
    candidates = [
        RetrievalCandidate(kind="value", table="t", column="c", payload="b", score=0.2),
        RetrievalCandidate(kind="value", table="t", column="c", payload="a", score=0.9),
        RetrievalCandidate(kind="value", table="t", column="c", payload="c", score=0.5),
    ]
    kept = await rerank("x", candidates, BrokenReranker())
    assert [k.payload for k in kept] == ["a", "c"]


async def test_rerank_single_candidate_untouched():
    only = [RetrievalCandidate(kind="column", table="t", column="c", payload="c", score=0.1)]
    assert await rerank("c", only, BrokenReranker()) == only


def test_levenshtein():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert edit_similarity("Phone", "phone") == 1.0


# ── Descriptions ──────────────────────────────────────────────────────────────

async def test_embedding_cache_avoids_repeat_calls(tmp_path):
    embedder = CountingEmbedder()
    cache = EmbeddingCache(tmp_path)
    first = await embed_cached(embedder, ["county name", "zip code"], cache)
    second = await embed_cached(embedder, ["zip code", "county name"], cache)
    assert sorted(embedder.seen) == ["county name", "zip code"]
    assert np.allclose(first[0], second[1])

    reloaded = EmbeddingCache(tmp_path)
    again = await embed_cached(BrokenEmbedder(), ["county name"], reloaded)
    assert np.allclose(again[0], first[0])


async def test_embedder_outage_without_cache(tmp_path):
    with pytest.raises(EmbedderUnavailableError):
        await embed_cached(BrokenEmbedder(), ["never embedded"], EmbeddingCache(tmp_path))


def test_vector_store_cosine_search():
    store = VectorStore(["x", "y", "z"], np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]))
    hits = store.search(np.array([3.0, 0.0]), 2)
    assert [h[0] for h in hits] == ["x", "z"]
    assert hits[0][1] == pytest.approx(1.0)
    assert hits[1][1] == pytest.approx(1 / np.sqrt(2))


async def test_description_retrieval_reranks_to_two(schools_catalog):
    found = await retrieve_descriptions(
        "free meal", HashingEmbedder(), schools_catalog, LexicalReranker(), EmbeddingCache()
    )
    assert 1 <= len(found) <= 2
    assert all(isinstance(d, DescriptionEntry) for d in found)
    assert ("frpm", "Free Meal Count (K-12)") in [(d.table, d.column) for d in found]


# ── Assembly ──────────────────────────────────────────────────────────────────

def test_assemble_deduplicates_and_adds_columns(schools_catalog):
    alameda = RetrievalCandidate(kind="value", table="schools", column="County", payload="Alameda", score=1.0)
    county = RetrievalCandidate(kind="column", table="schools", column="County", payload="County", score=0.4)
    desc = RetrievalCandidate(kind="description", table="schools", column="Zip", payload="postal code", score=0.3)
    entities = assemble_entities([[alameda, county], [county, alameda, desc]], schools_catalog)

    assert entities.columns == [("schools", "County"), ("schools", "Zip")]
    assert entities.values == [("schools", "County", "Alameda")]
    assert [(d.table, d.column) for d in entities.descriptions] == [("schools", "Zip")]


def test_assemble_rejects_dangling_hits(schools_catalog):
    ghost = RetrievalCandidate(kind="column", table="schools", column="Fone", payload="Fone", score=0.9)
    with pytest.raises(ConsistencyError):
        assemble_entities([[ghost]], schools_catalog)


def test_entities_reject_duplicates():
    with pytest.raises(ValueError):
        RetrievedEntities(columns=[("t", "c"), ("t", "c")])


async def test_entity_retriever_end_to_end(schools_catalog):
    retriever = EntityRetriever(
        schools_catalog, MinHashScorer(schools_catalog), LexicalReranker(),
        embedder=HashingEmbedder(), cache=EmbeddingCache(),
    )
    entities, hits = await retriever.retrieve(["Alameda", "free meal count", "500"])

    assert [h.keyword for h in hits] == ["Alameda", "free meal count", "500"]
    assert ("schools", "County", "Alameda") in entities.values
    assert ("schools", "City", "Alameda") in entities.values
    assert ("frpm", "Enrollment (K-12)", "500") in entities.values
    assert [v for v in hits[2].values] and all(v.payload == "500" for v in hits[2].values)
    for table, column in entities.columns:
        assert schools_catalog.has_column(table, column)
    for h in hits:
        assert len(h.columns) <= 2 and len(h.values) <= 2 and len(h.descriptions) <= 2


async def test_question_level_description_search(schools_catalog):
    retriever = EntityRetriever(
        schools_catalog, MinHashScorer(schools_catalog), LexicalReranker(),
        embedder=HashingEmbedder(), description_query="question",
    )
    _entities, hits = await retriever.retrieve(["Alameda"], "Which charter schools are in Alameda?")
    assert len(hits) == 2
    assert hits[0].descriptions == []
    assert hits[1].keyword == "Which charter schools are in Alameda?"
    assert 1 <= len(hits[1].descriptions) <= 2
