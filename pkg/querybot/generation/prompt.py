"""Render the four-part generation prompt from retrieved entities"""
import re
from typing import Dict, List, Optional, Sequence, Set, Tuple

from querybot.catalog.models import ColumnSchema, DatabaseCatalog, TableSchema
from querybot.catalog.values import is_purely_numeric
from querybot.errors import PromptBuildError
from querybot.generation.models import GenerationPrompt
from querybot.prompts import load_template
from querybot.retrieval.models import RetrievedEntities
from querybot.uqu.models import TaskDecomposition, UserQuestion

FULL_SCHEMA_NOTE = "(No entities were retrieved for this question; the full schema is shown.)"
_PLAIN_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def ident(name: str) -> str:
    return name if _PLAIN_IDENT.match(name) else '"' + name.replace('"', '""') + '"'


def qualified(table: str, column: str) -> str:
    return f"{ident(table)}.{ident(column)}"


def sql_literal(value: str, column: ColumnSchema) -> str:
    if column.kind == "numeric" and is_purely_numeric(value):
        return value
    return "'" + value.replace("'", "''") + "'"


def _column_line(table: TableSchema, column: ColumnSchema, catalog: DatabaseCatalog, examples: Sequence[str], show_description: bool) -> str:
    parts = [f"  - {qualified(table.name, column.name)} ({column.declared_type or 'untyped'}"]
    parts[0] += ", primary key)" if column.is_primary_key else ")"
    if examples:
        parts.append("examples: " + ", ".join(sql_literal(v, column) for v in examples))
    if show_description:
        entry = catalog.description_for(table.name, column.name)
        if entry is not None and entry.text:
            parts.append(f"description: {entry.text}")
    return "; ".join(parts)


def _join_hints(catalog: DatabaseCatalog, tables: Set[str]) -> List[str]:
    hints = []
    for table in catalog.tables:
        if table.name not in tables:
            continue
        for fk in table.foreign_keys:
            if fk.ref_table not in tables:
                continue
            ref = catalog.table(fk.ref_table)
            ref_column = fk.ref_column or (ref.primary_keys[0] if ref and ref.primary_keys else "rowid")
            hints.append(f"  - {qualified(table.name, fk.column)} = {qualified(fk.ref_table, ref_column)}")
    return hints


def check_entities(entities: RetrievedEntities, catalog: DatabaseCatalog) -> None:
    problems = []
    for table, column in entities.columns:
        if not catalog.has_column(table, column):
            problems.append(f"column {table}.{column}")
    for table, column, value in entities.values:
        if not catalog.has_column(table, column):
            problems.append(f"value {value!r} of {table}.{column}")
    for entry in entities.descriptions:
        if catalog.description_for(entry.table, entry.column) != entry:
            problems.append(f"description of {entry.table}.{entry.column}")
    if problems:
        raise PromptBuildError(f"entities not in catalog '{catalog.db_id}': {', '.join(problems)}")


def render_full_schema(catalog: DatabaseCatalog) -> str:
    lines = []
    for table in catalog.tables:
        lines.append(f"Table {ident(table.name)}:")
        for column in table.columns:
            lines.append(_column_line(table, column, catalog, [], show_description=False))
    hints = _join_hints(catalog, {t.name for t in catalog.tables})
    if hints:
        lines += ["Foreign keys:", *hints]
    return "\n".join(lines)


def render_schema(entities: RetrievedEntities, catalog: DatabaseCatalog) -> str:
    """Retrieved columns grouped by table in catalog order, with primary keys and example values."""
    if entities.is_empty:
        return f"{FULL_SCHEMA_NOTE}\n{render_full_schema(catalog)}"

    selected: Dict[str, Set[str]] = {}
    for table, column in entities.columns:
        selected.setdefault(table, set()).add(column)
    for table, column, _value in entities.values:
        selected.setdefault(table, set()).add(column)
    for entry in entities.descriptions:
        selected.setdefault(entry.table, set()).add(entry.column)
    described = {(d.table, d.column) for d in entities.descriptions}

    lines = []
    for table in catalog.tables:
        if table.name not in selected:
            continue
        lines.append(f"Table {ident(table.name)}:")
        for column in table.columns:
            if column.name not in selected[table.name] and not column.is_primary_key:
                continue
            examples = entities.values_for(table.name, column.name)
            lines.append(_column_line(table, column, catalog, examples, (table.name, column.name) in described))
    hints = _join_hints(catalog, set(selected))
    if hints:
        lines += ["Foreign keys:", *hints]
    return "\n".join(lines)


def render_reasoning(question: UserQuestion, decomposition: Optional[TaskDecomposition]) -> str:
    lines = [f"Question: {question.question}"]
    if question.hint:
        lines.append(f"Hint: {question.hint}")
    if decomposition is not None:
        lines.append(decomposition.render())
    return "\n".join(lines)


def build_prompt(
    question: UserQuestion,
    decomposition: Optional[TaskDecomposition],
    entities: RetrievedEntities,
    catalog: DatabaseCatalog,
    constraints: Optional[str] = None,
    incentives: Optional[str] = None,
) -> GenerationPrompt:
    check_entities(entities, catalog)
    return GenerationPrompt(
        schema_section=render_schema(entities, catalog),
        reasoning_section=render_reasoning(question, decomposition),
        constraints_section=(constraints or load_template("generation_constraints")).strip(),
        incentives_section=(incentives or load_template("generation_incentives")).strip(),
    )
