import pytest
from pydantic import ValidationError

from conftest import sql_reply
from querybot.catalog.models import DescriptionEntry
from querybot.clients.mock import ScriptedLlmClient
from querybot.config import RetryPolicy
from querybot.errors import PromptBuildError, RevisionRefusedError, SqlExtractionError
from querybot.generation.generator import extract_sql, first_statement, generate_sql, revise
from querybot.generation.models import ExecutionOutcome, GenerationPrompt, SqlCandidate
from querybot.generation.prompt import FULL_SCHEMA_NOTE, build_prompt, ident, render_reasoning
from querybot.retrieval.models import RetrievedEntities
from querybot.uqu.models import TaskDecomposition, UserQuestion

NO_WAIT = RetryPolicy(max_attempts=3, base_delay_s=0.0, max_delay_s=0.0)
QUESTION = UserQuestion(question="How many schools are in Alameda county?", hint="county is the County column")


# ── build_prompt ──────────────────────────────────────────────────────────────

def test_schema_lists_retrieved_columns_with_examples(schools_catalog):
    entities = RetrievedEntities(columns=[("schools", "County")], values=[("schools", "County", "Alameda")])
    prompt = build_prompt(QUESTION, None, entities, schools_catalog)
    assert prompt.schema_section == (
        "Table schools:\n"
        "  - schools.CDSCode (TEXT, primary key)\n"
        "  - schools.County (TEXT); examples: 'Alameda'"
    )


def test_numeric_examples_unquoted_and_join_hint(schools_catalog):
    entities = RetrievedEntities(
        columns=[("schools", "County"), ("frpm", "Enrollment (K-12)")],
        values=[("frpm", "Enrollment (K-12)", "500")],
    )
    schema = build_prompt(QUESTION, None, entities, schools_catalog).schema_section
    assert '  - frpm."Enrollment (K-12)" (REAL); examples: 500' in schema
    assert schema.index("Table frpm:") < schema.index("Table schools:")
    assert schema.endswith("Foreign keys:\n  - frpm.CDSCode = schools.CDSCode")


def test_described_columns_carry_description(schools_catalog):
    entry = schools_catalog.description_for("frpm", "Charter School (Y/N)")
    entities = RetrievedEntities(descriptions=[entry])
    schema = build_prompt(QUESTION, None, entities, schools_catalog).schema_section
    assert "description: whether the school is a charter" in schema
    assert "0: not a charter school; 1: charter school" in schema


def test_empty_entities_fall_back_to_full_schema(schools_catalog):
    schema = build_prompt(QUESTION, None, RetrievedEntities(), schools_catalog).schema_section
    assert schema.startswith(FULL_SCHEMA_NOTE)
    for table, column in schools_catalog.qualified_columns():
        assert f"{ident(table)}.{ident(column)}" in schema


def test_entities_outside_catalog_rejected(schools_catalog):
    with pytest.raises(PromptBuildError, match="Fone"):
        build_prompt(QUESTION, None, RetrievedEntities(columns=[("schools", "Fone")]), schools_catalog)
    stray = DescriptionEntry(table="schools", column="County", column_description="made up")
    with pytest.raises(PromptBuildError):
        build_prompt(QUESTION, None, RetrievedEntities(descriptions=[stray]), schools_catalog)


def test_reasoning_section_has_question_hint_and_tasks():
    decomposition = TaskDecomposition(main_tasks=["1. Count schools"], sub_tasks=["1.1 filter by county"])
    assert render_reasoning(QUESTION, decomposition) == (
        "Question: How many schools are in Alameda county?\n"
        "Hint: county is the County column\n"
        "Main tasks:\n  1. Count schools\n"
        "Sub-tasks:\n  1.1 filter by county"
    )
    assert render_reasoning(UserQuestion(question="q?"), None) == "Question: q?"


def test_all_four_sections_present(schools_catalog):
    prompt = build_prompt(QUESTION, None, RetrievedEntities(columns=[("schools", "County")]), schools_catalog)
    text = prompt.render()
    for section in (prompt.schema_section, prompt.reasoning_section, prompt.constraints_section, prompt.incentives_section):
        assert section and section in text


def test_blank_section_rejected():
    with pytest.raises(ValidationError):
        GenerationPrompt(schema_section="s", reasoning_section=" ", constraints_section="c", incentives_section="i")


# ── extract_sql ───────────────────────────────────────────────────────────────

@pytest.mark.parametrize("reply,expected", [
    ("```sql\nSELECT 1\n```", "SELECT 1"),
    ("Here:\n```\nSELECT name FROM t\n```\nDone.", "SELECT name FROM t"),
    ("```python\nprint(1)\n```\n```sql\nSELECT 2;\n```", "SELECT 2"),
    ("Sure.\nSELECT name FROM t\nWHERE x = 1\n\nThis returns names.", "SELECT name FROM t\nWHERE x = 1"),
    ("WITH c AS (SELECT 1 AS x) SELECT x FROM c;", "WITH c AS (SELECT 1 AS x) SELECT x FROM c"),
    ("```sql\nSELECT 1; SELECT 2;\n```", "SELECT 1"),
    ("```sql\nSELECT ';' AS semi;\n```", "SELECT ';' AS semi"),
])
def test_extract_sql(reply, expected):
    assert extract_sql(reply) == expected


def test_no_sql_in_reply():
    with pytest.raises(SqlExtractionError) as info:
        extract_sql("I am not sure how to answer.")
    assert info.value.raw == "I am not sure how to answer."


def test_first_statement_without_semicolon():
    assert first_statement("  SELECT 1  ") == "SELECT 1"


# ── generate / revise ─────────────────────────────────────────────────────────

@pytest.fixture
def prompt(schools_catalog):
    return build_prompt(QUESTION, None, RetrievedEntities(columns=[("schools", "County")]), schools_catalog)


async def test_generate_initial_candidate(prompt):
    llm = ScriptedLlmClient([sql_reply("SELECT COUNT(*) FROM schools WHERE County = 'Alameda'")])
    result = await generate_sql(llm, prompt, policy=NO_WAIT)
    assert result.candidate == SqlCandidate(
        sql="SELECT COUNT(*) FROM schools WHERE County = 'Alameda'", iteration=0, provenance="initial"
    )
    assert result.prompt == prompt.render()


async def test_generate_reasks_when_reply_has_no_sql(prompt):
    llm = ScriptedLlmClient(["Let me think about it.", sql_reply("SELECT 1")])
    result = await generate_sql(llm, prompt, policy=NO_WAIT)
    assert result.candidate.sql == "SELECT 1"
    assert len(llm.calls) == 2
    assert "contained no SQL statement" in llm.calls[1].user


async def test_revise_feeds_error_back(prompt):
    failed = SqlCandidate(sql="SELECT Fone FROM schools", iteration=2, provenance="revised")
    outcome = ExecutionOutcome(status="sql-error", error_message="no such column: Fone")
    llm = ScriptedLlmClient([sql_reply("SELECT County FROM schools")])
    result = await revise(llm, failed, outcome, prompt, policy=NO_WAIT)

    assert result.candidate.iteration == 3
    assert result.candidate.provenance == "revised"
    assert "The SQL below failed. Correct it." in result.prompt
    assert "SELECT Fone FROM schools" in result.prompt
    assert "no such column: Fone" in result.prompt


async def test_revise_refuses_at_cap(prompt):
    failed = SqlCandidate(sql="SELECT 1", iteration=5, provenance="revised")
    outcome = ExecutionOutcome(status="sql-error", error_message="boom")
    llm = ScriptedLlmClient([sql_reply("SELECT 2")])
    with pytest.raises(RevisionRefusedError):
        await revise(llm, failed, outcome, prompt, policy=NO_WAIT)
    assert llm.calls == []


def test_iteration_bounded():
    with pytest.raises(ValidationError):
        SqlCandidate(sql="SELECT 1", iteration=6)
