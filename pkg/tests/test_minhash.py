import math
import random

import numpy as np
import pytest

from querybot.retrieval.minhash import (
    IndexEntry,
    MinHasher,
    MinHashIndex,
    jaccard,
    minhash_estimate,
    shingles,
)

ALPHABET = "abcdefgh"


def _random_text(rng: random.Random, length: int) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(length))


def _mutate(rng: random.Random, text: str, edits: int) -> str:
    chars = list(text)
    for _ in range(edits):
        chars[rng.randrange(len(chars))] = rng.choice(ALPHABET)
    return "".join(chars)


def test_shingles_lowercase_trigrams():
    assert shingles("ABcd") == {"abc", "bcd"}
    assert shingles("ab") == {"ab"}
    assert shingles("   ") == set()
    assert shingles("a  b") == {"a b"}


def test_exact_jaccard():
    assert jaccard({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3)
    assert jaccard(set(), set()) == 1.0
    assert jaccard({"a"}, set()) == 0.0


def test_identical_texts_estimate_one():
    hasher = MinHasher(128, 42)
    a = hasher.signature("SuperSport Park")
    assert minhash_estimate(a, hasher.signature("supersport park")) == 1.0


def test_signature_length_and_empty_text():
    hasher = MinHasher(64, 3)
    assert hasher.signature("hello").shape == (64,)
    assert hasher.signature("  ") is None


def test_too_few_permutations_rejected():
    with pytest.raises(ValueError):
        MinHasher(8, 0)


def test_estimate_shape_mismatch():
    with pytest.raises(ValueError):
        minhash_estimate(np.zeros(4), np.zeros(5))


def test_estimates_track_exact_jaccard():
    """|estimate - J| <= 3*sqrt(J(1-J)/128) for at least 99% of 1000 random pairs."""
    rng = random.Random(1234)
    hasher = MinHasher(128, 42)
    within = 0
    pairs = 1000
    for _ in range(pairs):
        base = _random_text(rng, rng.randint(15, 40))
        other = _mutate(rng, base, rng.randint(0, 12)) if rng.random() < 0.8 else _random_text(rng, len(base))
        set_a, set_b = shingles(base), shingles(other)
        exact = jaccard(set_a, set_b)
        estimate = minhash_estimate(hasher.signature_of_set(set_a), hasher.signature_of_set(set_b))
        bound = 3 * math.sqrt(exact * (1 - exact) / 128)
        if abs(estimate - exact) <= bound + 1e-12:
            within += 1
    assert within / pairs >= 0.99


def test_same_seed_same_signature_different_seed_differs():
    assert np.array_equal(MinHasher(128, 42).signature("Alameda"), MinHasher(128, 42).signature("Alameda"))
    assert not np.array_equal(MinHasher(128, 42).signature("Alameda"), MinHasher(128, 43).signature("Alameda"))


def test_index_estimate_all_and_serialization():
    hasher = MinHasher(32, 5)
    values = ["Alameda", "Fresno", "Berkeley"]
    entries = [IndexEntry("schools", "County", v) for v in values]
    matrix = np.vstack([hasher.signature(v) for v in values])
    index = MinHashIndex(entries, matrix, 32, 5)

    scores = index.estimate_all(hasher.signature("alameda"))
    assert scores.shape == (3,)
    assert scores[0] == 1.0
    assert scores[0] > scores[1]
    assert index.estimate_all(None).tolist() == [0.0, 0.0, 0.0]

    restored = MinHashIndex.from_entries_json(index.entries_json(), index.signatures, 32, 5)
    assert restored == index


def test_index_rejects_mismatched_matrix():
    with pytest.raises(ValueError):
        MinHashIndex([IndexEntry("t", "c", "v")], np.zeros((2, 16), dtype=np.uint64), 16, 0)
