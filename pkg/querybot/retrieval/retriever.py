"""
Keyword -> entity retrieval.

Per keyword: first-stage scoring (MinHash or BM25) keeps the top five
columns with score > 0 and the top five values (exact match only for purely
numeric keywords, no threshold otherwise); a re-ranker then keeps two of each.
Descriptions are found by cosine similarity over embeddings and re-ranked the
same way. Results are cross-referenced, deduplicated and categorized.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from querybot.catalog.models import DatabaseCatalog, DescriptionEntry
from querybot.catalog.values import canonical_number, is_purely_numeric
from querybot.clients.embedder import Embedder
from querybot.errors import ConsistencyError
from querybot.retrieval.minhash import MinHashIndex
from querybot.retrieval.models import RetrievalCandidate, RetrievedEntities
from querybot.retrieval.reranker import Reranker
from querybot.retrieval.scorers import FirstStageScorer, MinHashScorer
from querybot.retrieval.vector_store import EmbeddingCache, VectorStore, embed_cached

logger = logging.getLogger(__name__)

TOP_K_FIRST = 5
TOP_K_FINAL = 2


# ── First stage ───────────────────────────────────────────────────────────────

def retrieve_columns(
    keyword: str,
    catalog: DatabaseCatalog,
    scorer: FirstStageScorer,
    top_k: int = TOP_K_FIRST,
) -> List[RetrievalCandidate]:
    """Top-k columns with score strictly above zero."""
    hits = [c for c in scorer.score_columns(keyword) if c.score > 0]
    hits.sort(key=RetrievalCandidate.sort_key)
    return hits[:top_k]


def exact_value_matches(keyword: str, catalog: DatabaseCatalog, top_k: int = TOP_K_FIRST) -> List[RetrievalCandidate]:
    target = canonical_number(keyword)
    hits = [
        RetrievalCandidate(kind="value", table=t.name, column=c.name, payload=v, score=1.0)
        for t in catalog.tables
        for c in t.columns
        for v in c.sample_values
        if v == target
    ]
    hits.sort(key=RetrievalCandidate.sort_key)
    return hits[:top_k]


def retrieve_values(
    keyword: str,
    index: Optional[MinHashIndex],
    catalog: DatabaseCatalog,
    scorer: Optional[FirstStageScorer] = None,
    top_k: int = TOP_K_FIRST,
) -> List[RetrievalCandidate]:
    """
    Purely numeric keywords only ever match equal canonical values; anything
    else (words, dates, codes) takes the top-k by similarity, zeros included.
    """
    if is_purely_numeric(keyword):
        return exact_value_matches(keyword, catalog, top_k)
    scorer = scorer or MinHashScorer(catalog, index)
    hits = scorer.score_values(keyword)
    hits.sort(key=RetrievalCandidate.sort_key)
    return hits[:top_k]


# ── Second stage ──────────────────────────────────────────────────────────────

async def rerank(
    keyword: str,
    candidates: Sequence[RetrievalCandidate],
    reranker: Reranker,
    top_k: int = TOP_K_FINAL,
) -> List[RetrievalCandidate]:
    """Keep the top_k candidates by re-ranker score; falls back to first-stage order on failure."""
    candidates = list(candidates)
    if len(candidates) <= 1:
        return candidates[:top_k]
    try:
        scores = await reranker.score(keyword, [c.payload for c in candidates])
        if len(scores) != len(candidates):
            raise ValueError(f"expected {len(candidates)} scores, got {len(scores)}")
    except Exception as exc:
        logger.warning(f"[Retrieval] Re-ranker '{reranker.model_id}' failed for '{keyword}', keeping first-stage order: {exc}")
        return sorted(candidates, key=RetrievalCandidate.sort_key)[:top_k]

    ranked = sorted(
        zip(scores, candidates),
        key=lambda pair: (-pair[0], *pair[1].sort_key()),
    )
    return [c for _s, c in ranked[:top_k]]


# ── Descriptions ──────────────────────────────────────────────────────────────

def description_text(entry: DescriptionEntry) -> str:
    return entry.text or entry.column


class DescriptionIndex:
    """Embedded descriptions of one catalog."""

    def __init__(self, catalog: DatabaseCatalog, embedder: Embedder, cache: Optional[EmbeddingCache] = None):
        self.catalog = catalog
        self.embedder = embedder
        self.cache = cache or EmbeddingCache()
        self._store: Optional[VectorStore[DescriptionEntry]] = None

    async def store(self) -> VectorStore[DescriptionEntry]:
        if self._store is None:
            entries = list(self.catalog.descriptions)
            vectors = await embed_cached(self.embedder, [description_text(e) for e in entries], self.cache)
            self._store = VectorStore(entries, vectors)
            logger.info(f"[Retrieval] '{self.catalog.db_id}': {len(entries)} description vectors ready")
        return self._store

    async def search(self, query: str, top_k: int = TOP_K_FIRST) -> List[RetrievalCandidate]:
        if not self.catalog.descriptions:
            return []
        store = await self.store()
        query_vec = await embed_cached(self.embedder, [query], self.cache)
        hits = [
            RetrievalCandidate(kind="description", table=e.table, column=e.column, payload=description_text(e), score=s)
            for e, s in store.search(query_vec[0], len(store))
        ]
        hits.sort(key=RetrievalCandidate.sort_key)
        return hits[:top_k]


async def retrieve_descriptions(
    keyword: str,
    embedder: Embedder,
    catalog: DatabaseCatalog,
    reranker: Reranker,
    cache: Optional[EmbeddingCache] = None,
    top_k_first: int = TOP_K_FIRST,
    top_k_final: int = TOP_K_FINAL,
    index: Optional[DescriptionIndex] = None,
) -> List[DescriptionEntry]:
    """Top-k_first by cosine similarity, re-ranked down to top_k_final."""
    if not catalog.descriptions:
        return []
    index = index or DescriptionIndex(catalog, embedder, cache)
    hits = await index.search(keyword, top_k_first)
    kept = await rerank(keyword, hits, reranker, top_k_final)
    return [catalog.description_for(c.table, c.column) for c in kept]


# ── Assembly ──────────────────────────────────────────────────────────────────

def assemble_entities(
    per_keyword_results: Iterable[Iterable[RetrievalCandidate]],
    catalog: DatabaseCatalog,
) -> RetrievedEntities:
    """Merge per-keyword hits; value and description hits also contribute their column."""
    columns: Dict[Tuple[str, str], None] = {}
    values: Dict[Tuple[str, str, str], None] = {}
    descriptions: Dict[Tuple[str, str], DescriptionEntry] = {}

    for results in per_keyword_results:
        for cand in results:
            if not catalog.has_column(cand.table, cand.column):
                raise ConsistencyError(f"{cand.kind} hit {cand.table}.{cand.column} is not in catalog '{catalog.db_id}'")
            columns.setdefault((cand.table, cand.column), None)
            if cand.kind == "value":
                values.setdefault((cand.table, cand.column, cand.payload), None)
            elif cand.kind == "description":
                entry = catalog.description_for(cand.table, cand.column)
                if entry is None:
                    raise ConsistencyError(f"no description for {cand.table}.{cand.column} in '{catalog.db_id}'")
                descriptions.setdefault((cand.table, cand.column), entry)

    return RetrievedEntities(
        columns=list(columns),
        values=list(values),
        descriptions=list(descriptions.values()),
    )


# ── Orchestration ─────────────────────────────────────────────────────────────

@dataclass
class KeywordHits:
    """What one keyword retrieved, kept for the trace."""
    keyword: str
    columns: List[RetrievalCandidate] = field(default_factory=list)
    values: List[RetrievalCandidate] = field(default_factory=list)
    descriptions: List[RetrievalCandidate] = field(default_factory=list)

    def all(self) -> List[RetrievalCandidate]:
        return [*self.columns, *self.values, *self.descriptions]

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "columns": [c.model_dump() for c in self.columns],
            "values": [c.model_dump() for c in self.values],
            "descriptions": [c.model_dump() for c in self.descriptions],
        }


class EntityRetriever:
    """Runs the full two-stage retrieval for a question's keywords against one catalog."""

    def __init__(
        self,
        catalog: DatabaseCatalog,
        scorer: FirstStageScorer,
        reranker: Reranker,
        embedder: Optional[Embedder] = None,
        cache: Optional[EmbeddingCache] = None,
        top_k_first: int = TOP_K_FIRST,
        top_k_final: int = TOP_K_FINAL,
        description_query: str = "keyword",
    ):
        self.catalog = catalog
        self.scorer = scorer
        self.reranker = reranker
        self.top_k_first = top_k_first
        self.top_k_final = top_k_final
        self.description_query = description_query
        self.descriptions = DescriptionIndex(catalog, embedder, cache) if embedder is not None else None

    async def _descriptions_for(self, query: str) -> List[RetrievalCandidate]:
        if self.descriptions is None or not self.catalog.descriptions:
            return []
        hits = await self.descriptions.search(query, self.top_k_first)
        return await rerank(query, hits, self.reranker, self.top_k_final)

    async def retrieve_keyword(self, keyword: str) -> KeywordHits:
        hits = KeywordHits(keyword=keyword)
        first_columns = retrieve_columns(keyword, self.catalog, self.scorer, self.top_k_first)
        first_values = retrieve_values(keyword, self.catalog.value_index, self.catalog, self.scorer, self.top_k_first)
        hits.columns = await rerank(keyword, first_columns, self.reranker, self.top_k_final)
        hits.values = await rerank(keyword, first_values, self.reranker, self.top_k_final)
        if self.description_query == "keyword":
            hits.descriptions = await self._descriptions_for(keyword)
        return hits

    async def retrieve(self, keywords: Sequence[str], question: str = "") -> Tuple[RetrievedEntities, List[KeywordHits]]:
        per_keyword: List[KeywordHits] = []
        for keyword in keywords:
            per_keyword.append(await self.retrieve_keyword(keyword))

        if self.description_query == "question" and question:
            extra = KeywordHits(keyword=question, descriptions=await self._descriptions_for(question))
            per_keyword.append(extra)

        entities = assemble_entities([h.all() for h in per_keyword], self.catalog)
        logger.info(
            f"[Retrieval] {len(keywords)} keyword(s) -> {len(entities.columns)} columns, "
            f"{len(entities.values)} values, {len(entities.descriptions)} descriptions"
        )
        return entities, per_keyword
