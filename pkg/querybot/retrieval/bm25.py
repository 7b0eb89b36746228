"""Okapi BM25 over small in-memory corpora (column names, table values)"""
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Sequence

from querybot.errors import RetrievalError

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """Lowercase word tokens; camelCase and snake_case are split."""
    return [t.lower() for t in _TOKEN.findall(_CAMEL.sub(" ", text))]


@dataclass
class Bm25Stats:
    """Corpus statistics needed to score any (query, document) pair."""
    doc_freqs: Counter = field(default_factory=Counter)
    term_freqs: Dict[Hashable, Counter] = field(default_factory=dict)
    doc_lengths: Dict[Hashable, int] = field(default_factory=dict)
    avg_doc_length: float = 0.0
    k1: float = 1.2
    b: float = 0.75

    @property
    def corpus_size(self) -> int:
        return len(self.doc_lengths)

    def idf(self, term: str) -> float:
        n = self.corpus_size
        df = self.doc_freqs.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def build_bm25(docs: Mapping[Hashable, Sequence[str]], k1: float = 1.2, b: float = 0.75) -> Bm25Stats:
    """Build stats from doc_id -> token list."""
    stats = Bm25Stats(k1=k1, b=b)
    for doc_id, tokens in docs.items():
        counts = Counter(tokens)
        stats.term_freqs[doc_id] = counts
        stats.doc_lengths[doc_id] = len(tokens)
        stats.doc_freqs.update(counts.keys())
    if stats.doc_lengths:
        total = sum(stats.doc_lengths.values())
        # all-empty corpus: any positive value keeps the length norm finite
        stats.avg_doc_length = total / len(stats.doc_lengths) if total else 1.0
    return stats


def bm25_score(query_terms: Iterable[str], doc_id: Hashable, stats: Bm25Stats) -> float:
    """Okapi BM25 of one document for a query, summed over query terms."""
    if doc_id not in stats.term_freqs:
        raise RetrievalError(f"unknown document {doc_id!r}")
    tf = stats.term_freqs[doc_id]
    norm = stats.k1 * (1.0 - stats.b + stats.b * stats.doc_lengths[doc_id] / stats.avg_doc_length)
    score = 0.0
    for term in query_terms:
        freq = tf.get(term, 0)
        if not freq:
            continue
        score += stats.idf(term) * freq * (stats.k1 + 1.0) / (freq + norm)
    return score
