"""Text and keyword metrics: BLEU-1/2, ROUGE-1/2/L, keyword precision/recall/F1"""
import re
from typing import List, Set, Tuple

from nltk.translate.bleu_score import SmoothingFunction, sentence_bleu
from rouge_score import rouge_scorer, tokenizers

from querybot.uqu.models import KeywordSet, normalize_ws

_TOKEN = re.compile(r"\w+|[^\w\s]")
_SMOOTHING = SmoothingFunction().method1


def tokenize(text: str) -> List[str]:
    """Lowercase; punctuation split off into its own tokens."""
    return _TOKEN.findall(text.lower())


def _f_measure(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


# ── BLEU ──────────────────────────────────────────────────────────────────────

def bleu(candidate: str, reference: str, max_n: int = 2) -> float:
    """Sentence BLEU with uniform weights up to max_n and a brevity penalty.

    Orders with no matching n-gram are smoothed; no unigram overlap scores 0.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    ref = tokenize(reference)
    if not ref:
        raise ValueError("reference text is empty")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    weights = tuple(1.0 / max_n for _ in range(max_n))
    score = sentence_bleu([ref], cand, weights=weights, smoothing_function=_SMOOTHING)
    return min(1.0, float(score))


# ── ROUGE ─────────────────────────────────────────────────────────────────────

class _MetricTokenizer(tokenizers.Tokenizer):
    """Same tokens as BLEU, so punctuation and digits count alike in both."""

    def tokenize(self, text: str) -> List[str]:
        return tokenize(text)


_ROUGE = rouge_scorer.RougeScorer(["rouge1", "rouge2", "rougeL"], tokenizer=_MetricTokenizer())


def rouge(candidate: str, reference: str) -> Tuple[float, float, float]:
    """(ROUGE-1, ROUGE-2, ROUGE-L) F-measures."""
    if not tokenize(reference):
        raise ValueError("reference text is empty")
    if not tokenize(candidate):
        return 0.0, 0.0, 0.0
    scores = _ROUGE.score(reference, candidate)
    return scores["rouge1"].fmeasure, scores["rouge2"].fmeasure, scores["rougeL"].fmeasure


# ── Keywords ──────────────────────────────────────────────────────────────────

def keyword_items(keywords: KeywordSet) -> Set[str]:
    """Objects plus implementation entries flattened to 'key: value', case-folded."""
    items = {normalize_ws(o).casefold() for o in keywords.objects}
    for key, value in keywords.implementations.items():
        items.add(normalize_ws(f"{key}: {value}").casefold())
    items.discard("")
    return items


def keyword_f1(pred: KeywordSet, gold: KeywordSet) -> Tuple[float, float, float]:
    """(precision, recall, f1) over exact matches; empty vs empty is a perfect score."""
    predicted, expected = keyword_items(pred), keyword_items(gold)
    if not predicted and not expected:
        return 1.0, 1.0, 1.0
    hits = len(predicted & expected)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(expected) if expected else 0.0
    return precision, recall, _f_measure(precision, recall)
