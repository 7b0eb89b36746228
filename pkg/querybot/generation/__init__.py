"""Prompted SQL generation, read-only execution and the revision loop"""
from querybot.generation.models import (
    ExecutionOutcome,
    GenerationPrompt,
    RevisionTrace,
    SqlCandidate,
    TraceStep,
)
from querybot.generation.executor import execute_sql
from querybot.generation.generator import extract_sql, generate_sql, revise
from querybot.generation.prompt import build_prompt

__all__ = [
    "ExecutionOutcome",
    "GenerationPrompt",
    "RevisionTrace",
    "SqlCandidate",
    "TraceStep",
    "execute_sql",
    "extract_sql",
    "generate_sql",
    "revise",
    "build_prompt",
]
