import math

import pytest
from pydantic import ValidationError

from querybot.clients.mock import ScriptedLlmClient
from querybot.config import RetryPolicy
from querybot.errors import JudgeScoreError
from querybot.evaluation.calibration import CalibrationModel, calibrate, fit_calibration
from querybot.evaluation.judge import judge_score, parse_score
from querybot.evaluation.metrics import bleu, keyword_f1, rouge, tokenize
from querybot.uqu.models import KeywordSet, TaskDecomposition

NO_WAIT = RetryPolicy(max_attempts=3, base_delay_s=0.0, max_delay_s=0.0)


# ── BLEU / ROUGE ──────────────────────────────────────────────────────────────

def test_identical_text_scores_one():
    text = "1. find the location of SuperSport Park 1.1 check if the location is at Centurion"
    assert bleu(text, text, 1) == pytest.approx(1.0)
    assert bleu(text, text, 2) == pytest.approx(1.0)
    assert rouge(text, text) == pytest.approx((1.0, 1.0, 1.0))


def test_disjoint_text_scores_zero():
    assert bleu("alpha beta", "gamma delta", 1) == 0.0
    assert bleu("alpha beta", "gamma delta", 2) == 0.0
    assert rouge("alpha beta", "gamma delta") == (0.0, 0.0, 0.0)


def test_short_prefix_pays_brevity_penalty():
    candidate, reference = "find the location", "find the location of SuperSport Park"
    assert bleu(candidate, reference, 1) == pytest.approx(math.exp(-1), abs=1e-6)
    assert bleu(candidate, reference, 2) == pytest.approx(math.exp(-1), abs=1e-6)


def test_bleu_clips_repeated_words():
    # unigram precision 2/4, bigram precision 1/3
    assert bleu("the the the cat", "the cat sat on", 2) == pytest.approx(math.sqrt(0.5 * (1 / 3)))


def test_missing_bigram_order_is_smoothed():
    # unigram precision 1/2; zero bigram matches smoothed to 0.1/1
    assert bleu("the cat", "the dog", 2) == pytest.approx(math.sqrt(0.5 * 0.1))
    assert bleu("the cat", "the dog", 1) == pytest.approx(0.5)


def test_rouge_l_uses_longest_common_subsequence():
    # LCS "a c e": precision 3/5, recall 3/3
    _r1, _r2, rl = rouge("a x c y e", "a c e")
    assert rl == pytest.approx(2 * 0.6 * 1.0 / 1.6)


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        bleu("x", "   ")
    with pytest.raises(ValueError):
        rouge("x", "")


def test_empty_candidate_scores_zero():
    assert bleu("", "find the school") == 0.0
    assert rouge("", "find the school") == (0.0, 0.0, 0.0)


def test_tokenize_splits_punctuation():
    assert tokenize("1.1 Find X's name.") == ["1", ".", "1", "find", "x", "'", "s", "name", "."]


# ── Keyword F1 ────────────────────────────────────────────────────────────────

GOLD = KeywordSet(objects=["tax code", "business", "inspection type"])


def test_missing_keyword():
    precision, recall, f1 = keyword_f1(KeywordSet(objects=["tax code", "inspection type"]), GOLD)
    assert precision == pytest.approx(1.0)
    assert recall == pytest.approx(2 / 3)
    assert f1 == pytest.approx(0.8)


def test_wrong_keyword():
    assert keyword_f1(KeywordSet(objects=["owner"]), GOLD) == (0.0, 0.0, 0.0)


def test_exact_match_ignores_case_and_spacing():
    assert keyword_f1(KeywordSet(objects=["Tax  Code", "BUSINESS", "inspection type"]), GOLD) == (1.0, 1.0, 1.0)


def test_implementations_compared_as_pairs():
    gold = KeywordSet(objects=["business"], implementations={"named": "Rue Lepic"})
    assert keyword_f1(gold, gold)[2] == 1.0
    wrong_value = KeywordSet(objects=["business"], implementations={"named": "Rue Lepi"})
    assert keyword_f1(wrong_value, gold) == pytest.approx((0.5, 0.5, 0.5))


def test_empty_prediction():
    assert keyword_f1(KeywordSet(), GOLD) == (0.0, 0.0, 0.0)
    assert keyword_f1(KeywordSet(), KeywordSet()) == (1.0, 1.0, 1.0)


# ── Calibration ───────────────────────────────────────────────────────────────

@pytest.mark.parametrize("raw,calibrated", [
    (4.141, 4.245),
    (4.112, 4.216),
    (4.124, 4.228),
    (4.081, 4.184),
    (4.256, 4.362),
    (4.286, 4.392),
])
def test_default_calibration(raw, calibrated):
    assert calibrate(raw) == pytest.approx(calibrated, abs=1e-3)


def test_calibration_preserves_order():
    raws = [1.0, 2.5, 3.2, 4.9]
    calibrated = [calibrate(r) for r in raws]
    assert calibrated == sorted(calibrated)


def test_calibration_needs_positive_slope():
    with pytest.raises(ValidationError):
        CalibrationModel(slope=0.0)
    with pytest.raises(ValidationError):
        CalibrationModel(slope=-1.0)


def test_fit_recovers_line():
    raw = [1.0, 2.0, 3.0, 4.0, 5.0]
    human = [1.015 * r + 0.042 for r in raw]
    model = fit_calibration(raw, human)
    assert model.slope == pytest.approx(1.015)
    assert model.intercept == pytest.approx(0.042)


def test_fit_rejects_degenerate_input():
    with pytest.raises(ValueError):
        fit_calibration([3.0, 3.0, 3.0], [2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        fit_calibration([1.0], [1.0])
    with pytest.raises(ValueError):
        fit_calibration([1.0, 2.0], [1.0])


# ── Judge ─────────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("reply,score", [
    ("4", 4.0),
    ("Score: 3.5 out of 5", 3.5),
    ("5\n", 5.0),
    ("1", 1.0),
    ("On a scale of 1 to 5, I give this a 4", 4.0),
    ("Step 1 is right but step 2 misses the filter. Score: 3", 3.0),
    ("I would rate it 4/5.", 4.0),
    ("2 out of 5", 2.0),
])
def test_parse_score(reply, score):
    assert parse_score(reply) == score


@pytest.mark.parametrize("reply", ["excellent", "7", "0.5", "", "Score: 7", "10 out of 10"])
def test_parse_score_rejects(reply):
    with pytest.raises(JudgeScoreError):
        parse_score(reply)


async def test_judge_reasks_once():
    gold = TaskDecomposition(main_tasks=["1. Find the location of SuperSport Park"])
    llm = ScriptedLlmClient(["Looks good overall.", "4"])
    assert await judge_score(llm, gold, gold, question="Where is SuperSport Park?", policy=NO_WAIT) == 4.0
    assert len(llm.calls) == 2
    assert "Reply with a single number from 1 to 5." in llm.calls[0].user
    assert "1. Find the location of SuperSport Park" in llm.calls[0].user


async def test_judge_gives_up_after_reask():
    gold = TaskDecomposition(main_tasks=["1. x"])
    with pytest.raises(JudgeScoreError):
        await judge_score(ScriptedLlmClient(["no idea"]), gold, gold, policy=NO_WAIT)
