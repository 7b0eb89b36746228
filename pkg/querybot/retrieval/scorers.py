"""First-stage scorers: MinHash/Jaccard and BM25 behind one interface"""
from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from querybot.catalog.models import DatabaseCatalog
from querybot.retrieval.bm25 import Bm25Stats, bm25_score, build_bm25, tokenize
from querybot.retrieval.minhash import IndexEntry, MinHashIndex, get_hasher
from querybot.retrieval.models import RetrievalCandidate


class FirstStageScorer(ABC):
    """Scores one keyword against every column name and every table value."""

    name: str = "scorer"

    @abstractmethod
    def score_columns(self, keyword: str) -> List[RetrievalCandidate]:
        """Every (table, column) with its score, unfiltered"""
        pass

    @abstractmethod
    def score_values(self, keyword: str) -> List[RetrievalCandidate]:
        """Every indexed value with its score, unfiltered"""
        pass


def _value_entries(catalog: DatabaseCatalog) -> List[IndexEntry]:
    return [
        IndexEntry(t.name, c.name, v)
        for t in catalog.tables
        for c in t.columns
        for v in c.sample_values
    ]


class MinHashScorer(FirstStageScorer):
    """Estimated Jaccard over lowercase character 3-gram shingles."""

    name = "minhash"

    def __init__(self, catalog: DatabaseCatalog, index: Optional[MinHashIndex] = None, num_permutations: int = 128, seed: int = 42):
        self.catalog = catalog
        self.index = index if index is not None else catalog.value_index
        if self.index is not None:
            num_permutations, seed = self.index.num_permutations, self.index.seed
        self.hasher = get_hasher(num_permutations, seed)
        self._columns = catalog.qualified_columns()
        self._column_signatures: Optional[np.ndarray] = None

    def _column_matrix(self) -> np.ndarray:
        if self._column_signatures is None:
            rows = []
            for _table, column in self._columns:
                sig = self.hasher.signature(column)
                rows.append(sig if sig is not None else np.zeros(self.hasher.num_permutations, dtype=np.uint64))
            self._column_signatures = np.vstack(rows) if rows else np.empty((0, self.hasher.num_permutations))
        return self._column_signatures

    def score_columns(self, keyword: str) -> List[RetrievalCandidate]:
        sig = self.hasher.signature(keyword)
        if sig is None or not self._columns:
            return []
        scores = (self._column_matrix() == sig).mean(axis=1)
        return [
            RetrievalCandidate(kind="column", table=t, column=c, payload=c, score=float(s))
            for (t, c), s in zip(self._columns, scores)
        ]

    def score_values(self, keyword: str) -> List[RetrievalCandidate]:
        if self.index is None:
            return []
        scores = self.index.estimate_all(self.hasher.signature(keyword))
        return [
            RetrievalCandidate(kind="value", table=e.table, column=e.column, payload=e.value, score=float(s))
            for e, s in zip(self.index.entries, scores)
        ]


class Bm25Scorer(FirstStageScorer):
    """Okapi BM25 with column names and values as two separate corpora."""

    name = "bm25"

    def __init__(self, catalog: DatabaseCatalog, k1: float = 1.2, b: float = 0.75):
        self.catalog = catalog
        self._columns = catalog.qualified_columns()
        self._values = _value_entries(catalog)
        self.column_stats: Bm25Stats = build_bm25(
            {i: tokenize(column) for i, (_t, column) in enumerate(self._columns)}, k1, b
        )
        self.value_stats: Bm25Stats = build_bm25(
            {i: tokenize(e.value) for i, e in enumerate(self._values)}, k1, b
        )

    def score_columns(self, keyword: str) -> List[RetrievalCandidate]:
        terms = tokenize(keyword)
        return [
            RetrievalCandidate(kind="column", table=t, column=c, payload=c, score=bm25_score(terms, i, self.column_stats))
            for i, (t, c) in enumerate(self._columns)
        ]

    def score_values(self, keyword: str) -> List[RetrievalCandidate]:
        terms = tokenize(keyword)
        return [
            RetrievalCandidate(kind="value", table=e.table, column=e.column, payload=e.value, score=bm25_score(terms, i, self.value_stats))
            for i, e in enumerate(self._values)
        ]


def make_scorer(name: str, catalog: DatabaseCatalog, index: Optional[MinHashIndex] = None, k1: float = 1.2, b: float = 0.75) -> FirstStageScorer:
    if name == "minhash":
        return MinHashScorer(catalog, index)
    if name == "bm25":
        return Bm25Scorer(catalog, k1, b)
    raise ValueError(f"unknown scorer '{name}' (expected minhash or bm25)")
