"""
MinHash signatures over lowercase character 3-gram shingles.

Signatures come from datasketch with one shared permutation family per
(num_permutations, seed), so every signature in an index is comparable and
a rebuild with the same seed is byte-identical.
"""
import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Set

import numpy as np
from datasketch import MinHash

SHINGLE_SIZE = 3
SIGNATURE_DTYPE = np.uint64


def shingles(text: str, size: int = SHINGLE_SIZE) -> Set[str]:
    """Lowercase character n-grams; text shorter than n is one shingle."""
    normalized = re.sub(r"\s+", " ", text.lower().strip())
    if not normalized:
        return set()
    if len(normalized) < size:
        return {normalized}
    return {normalized[i : i + size] for i in range(len(normalized) - size + 1)}


def jaccard(a: Set[str], b: Set[str]) -> float:
    """Exact set Jaccard; two empty sets count as identical."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


class MinHasher:
    """Signature factory bound to one permutation family."""

    def __init__(self, num_permutations: int = 128, seed: int = 42):
        if num_permutations < 16:
            raise ValueError(f"num_permutations must be >= 16, got {num_permutations}")
        self.num_permutations = num_permutations
        self.seed = seed
        self._permutations = MinHash(num_perm=num_permutations, seed=seed).permutations

    def signature_of_set(self, tokens: Iterable[str]) -> Optional[np.ndarray]:
        """Signature for a shingle set, or None for the empty set."""
        encoded = [t.encode("utf-8") for t in sorted(set(tokens))]
        if not encoded:
            return None
        mh = MinHash(num_perm=self.num_permutations, seed=self.seed, permutations=self._permutations)
        mh.update_batch(encoded)
        return np.asarray(mh.hashvalues, dtype=SIGNATURE_DTYPE).copy()

    def signature(self, text: str) -> Optional[np.ndarray]:
        return self.signature_of_set(shingles(text))


@lru_cache(maxsize=8)
def get_hasher(num_permutations: int, seed: int) -> MinHasher:
    return MinHasher(num_permutations, seed)


def minhash_estimate(sig_a: Sequence[int], sig_b: Sequence[int]) -> float:
    """Fraction of positions where two signatures agree (Jaccard estimate)."""
    a = np.asarray(sig_a)
    b = np.asarray(sig_b)
    if a.shape != b.shape:
        raise ValueError(f"signature length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty signatures")
    return float(np.count_nonzero(a == b)) / a.size


@dataclass(frozen=True)
class IndexEntry:
    table: str
    column: str
    value: str


class MinHashIndex:
    """One signature per (table, column, value) entry, stacked row-wise."""

    def __init__(
        self,
        entries: List[IndexEntry],
        signatures: np.ndarray,
        num_permutations: int,
        seed: int,
    ):
        signatures = np.asarray(signatures, dtype=SIGNATURE_DTYPE)
        if signatures.ndim != 2:
            signatures = signatures.reshape(len(entries), num_permutations)
        if signatures.shape != (len(entries), num_permutations):
            raise ValueError(
                f"signature matrix {signatures.shape} does not match "
                f"{len(entries)} entries x {num_permutations} permutations"
            )
        self.entries = list(entries)
        self.signatures = signatures
        self.num_permutations = num_permutations
        self.seed = seed

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MinHashIndex):
            return NotImplemented
        return self.fingerprint() == other.fingerprint()

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    @property
    def hasher(self) -> MinHasher:
        return get_hasher(self.num_permutations, self.seed)

    def estimate_all(self, signature: Optional[np.ndarray]) -> np.ndarray:
        """Jaccard estimate of `signature` against every entry."""
        if signature is None or not len(self.entries):
            return np.zeros(len(self.entries), dtype=float)
        return (self.signatures == signature).mean(axis=1)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"{self.num_permutations}:{self.seed}".encode())
        digest.update(self.entries_json().encode("utf-8"))
        digest.update(np.ascontiguousarray(self.signatures).tobytes())
        return digest.hexdigest()

    def entries_json(self) -> str:
        return json.dumps([[e.table, e.column, e.value] for e in self.entries], ensure_ascii=False)

    @classmethod
    def from_entries_json(
        cls, entries_json: str, signatures: np.ndarray, num_permutations: int, seed: int
    ) -> "MinHashIndex":
        entries = [IndexEntry(*row) for row in json.loads(entries_json)]
        return cls(entries, signatures, num_permutations, seed)
