import pytest
from pydantic import ValidationError

from conftest import uqu_reply
from querybot.clients.cache import ResponseCache
from querybot.clients.llm import UsageLedger
from querybot.clients.mock import ScriptedLlmClient
from querybot.config import RetryPolicy
from querybot.errors import PromptBuildError, UquParseError
from querybot.prompts import load_template
from querybot.uqu import KeywordSet, TaskDecomposition, UserQuestion, parse_response, serialize_response, understand

NO_WAIT = RetryPolicy(max_attempts=3, base_delay_s=0.0, max_delay_s=0.0)


# ── parse_response ────────────────────────────────────────────────────────────

def test_well_formed_reply():
    raw = uqu_reply(
        ["1. Find the location of SuperSport Park"],
        ["1.1 find the location of SuperSport Park", "1.2 check if the location is at Centurion"],
        ["location", "SuperSport Park"],
        {"located at": "Centurion"},
    )
    decomposition, keywords = parse_response(raw)

    assert decomposition.main_tasks == ["1. Find the location of SuperSport Park"]
    assert decomposition.sub_tasks == [
        "1.1 find the location of SuperSport Park",
        "1.2 check if the location is at Centurion",
    ]
    assert keywords.objects == ["location", "SuperSport Park"]
    assert keywords.implementations == {"located at": "Centurion"}


def test_reply_wrapped_in_prose_and_fences():
    body = uqu_reply(["1. List the tax code"], [], ["tax code", "business", "inspection type"], {"named": "Rue Lepic"})
    fenced = f"Sure! Here is the analysis:\n```json\n{body}\n```\nLet me know if you need more."
    assert parse_response(fenced) == parse_response(body)
    assert parse_response(f"The answer is {body} as requested.") == parse_response(body)


def test_missing_numbers_are_filled_in():
    decomposition, _ = parse_response(uqu_reply(
        ["Find the rental price per day of the most expensive children's film"],
        ["find children's films", "order by rental price"],
        ["film"],
    ))
    assert decomposition.main_tasks == ["1. Find the rental price per day of the most expensive children's film"]
    assert decomposition.sub_tasks == ["1.1 find children's films", "1.2 order by rental price"]


def test_whitespace_normalized():
    decomposition, keywords = parse_response(uqu_reply(["1.   Count   the\n schools"], [], ["  schools  "]))
    assert decomposition.main_tasks == ["1. Count the schools"]
    assert keywords.objects == ["schools"]


def test_sub_task_without_main_is_named():
    with pytest.raises(UquParseError) as info:
        parse_response(uqu_reply(["1. Find the school"], ["1.1 filter by county", "2.1 sort by name"], ["school"]))
    assert any("2.1" in v for v in info.value.violations)
    assert "2.1" in str(info.value)


def test_third_main_reference_with_two_mains():
    with pytest.raises(UquParseError) as info:
        parse_response(uqu_reply(["1. a", "2. b"], ["3.1 c"], ["x"]))
    assert any("3.1" in v for v in info.value.violations)


def test_non_increasing_numbering_rejected():
    with pytest.raises(UquParseError) as info:
        parse_response(uqu_reply(["1. a", "2. b"], ["1.2 c", "1.1 d"], ["x"]))
    assert any("1.1" in v and "does not follow" in v for v in info.value.violations)


def test_no_json_at_all():
    with pytest.raises(UquParseError) as info:
        parse_response("I cannot help with that.")
    assert info.value.raw == "I cannot help with that."


def test_missing_object_key():
    with pytest.raises(UquParseError) as info:
        parse_response('{"main_task": ["1. x"], "sub_task": []}')
    assert "missing key 'object'" in info.value.violations


def test_empty_main_tasks_rejected():
    with pytest.raises(UquParseError):
        parse_response(uqu_reply([], [], ["x"]))


def test_alternate_key_spellings():
    decomposition, keywords = parse_response(
        '{"Main Task": ["1. Count schools"], "sub tasks": [], "objects": ["schools"], "Implementation": {}}'
    )
    assert decomposition.main_tasks == ["1. Count schools"]
    assert keywords.objects == ["schools"]


def test_implementation_as_list_of_pairs():
    _, keywords = parse_response(
        '{"main_task": ["1. x"], "object": ["b"], "implementation": [{"opened after": "2000/1/1"}, "named: Rue Lepic"]}'
    )
    assert keywords.implementations == {"opened after": "2000/1/1", "named": "Rue Lepic"}


def test_serialize_then_parse_is_identity():
    decomposition = TaskDecomposition(main_tasks=["1. a", "2. b"], sub_tasks=["1.1 c", "2.1 d", "2.2 e"])
    keywords = KeywordSet(objects=["x", "y"], implementations={"k": "v", "self contained": ""})
    assert parse_response(serialize_response(decomposition, keywords)) == (decomposition, keywords)


# ── Models ────────────────────────────────────────────────────────────────────

def test_objects_deduplicated_case_insensitively():
    keywords = KeywordSet(objects=["tax code", "Tax Code", "business", "inspection type", "BUSINESS"])
    assert keywords.objects == ["tax code", "business", "inspection type"]


def test_retrieval_keywords_order():
    keywords = KeywordSet(objects=["business", "tax code"], implementations={"named": "Rue Lepic", "Business": ""})
    assert keywords.retrieval_keywords() == ["business", "tax code", "named", "Rue Lepic"]


def test_decomposition_render_orders_subs():
    decomposition = TaskDecomposition(main_tasks=["1. a", "2. b"], sub_tasks=["1.1 c", "2.1 d"])
    assert decomposition.render() == "Main tasks:\n  1. a\n  2. b\nSub-tasks:\n  1.1 c\n  2.1 d"
    assert decomposition.as_text() == "1. a 2. b 1.1 c 2.1 d"


def test_question_must_not_be_empty():
    with pytest.raises(ValidationError):
        UserQuestion(question="   ")


# ── understand ────────────────────────────────────────────────────────────────

SUPERSPORT = uqu_reply(
    ["1. Check whether SuperSport Park is located at Centurion"],
    ["1.1 find the location of SuperSport Park", "1.2 check if the location is at Centurion"],
    ["location"],
    {"named": "SuperSport Park", "located at": "Centurion"},
)


async def test_understand_parses_first_reply():
    llm = ScriptedLlmClient([SUPERSPORT])
    question = UserQuestion(question="Is SuperSport Park located at Centurion?", hint="venue names are exact")
    result = await understand(question, llm, load_template("uqu"), policy=NO_WAIT)

    assert result.decomposition.sub_tasks == [
        "1.1 find the location of SuperSport Park",
        "1.2 check if the location is at Centurion",
    ]
    assert result.raw_responses == [SUPERSPORT]
    assert len(llm.calls) == 1
    assert "Question: Is SuperSport Park located at Centurion?" in llm.calls[0].user
    assert "Hint: venue names are exact" in result.prompt


async def test_understand_reasks_once():
    llm = ScriptedLlmClient(["not json", SUPERSPORT])
    ledger = UsageLedger()
    result = await understand(UserQuestion(question="Is SuperSport Park located at Centurion?"), llm,
                              load_template("uqu"), policy=NO_WAIT, ledger=ledger)

    assert len(llm.calls) == 2
    assert llm.calls[1].temperature == 0.0
    assert "could not be used" in llm.calls[1].user
    assert result.raw_responses == ["not json", SUPERSPORT]
    assert ledger.calls() == 2


async def test_understand_gives_up_after_reask():
    llm = ScriptedLlmClient(["nope", "still nope"])
    with pytest.raises(UquParseError) as info:
        await understand(UserQuestion(question="How many schools?"), llm, load_template("uqu"), policy=NO_WAIT)
    assert info.value.raw == "still nope"
    assert len(llm.calls) == 2


async def test_understand_is_repeatable_through_cache():
    cache = ResponseCache()
    question = UserQuestion(question="Is SuperSport Park located at Centurion?")
    first = await understand(question, ScriptedLlmClient([SUPERSPORT]), load_template("uqu"), cache=cache, policy=NO_WAIT)

    offline = ScriptedLlmClient(["never used"])
    second = await understand(question, offline, load_template("uqu"), cache=cache, policy=NO_WAIT)
    assert offline.calls == []
    assert (second.decomposition, second.keywords) == (first.decomposition, first.keywords)


async def test_template_without_placeholders():
    with pytest.raises(PromptBuildError):
        await understand(UserQuestion(question="q"), ScriptedLlmClient([SUPERSPORT]), "Just answer.")
