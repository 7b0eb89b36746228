"""Retrieval result types"""
import math
from typing import List, Literal, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from querybot.catalog.models import DescriptionEntry

CandidateKind = Literal["column", "value", "description"]


class RetrievalCandidate(BaseModel):
    """One scored hit. `payload` is the column name, the value, or the description text."""
    model_config = {"frozen": True}

    kind: CandidateKind
    table: str
    column: str
    payload: str = ""
    score: float = 0.0

    @field_validator("score")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"score must be finite, got {value}")
        return value

    def sort_key(self) -> tuple:
        return (-self.score, self.table, self.column, self.payload)


class RetrievedEntities(BaseModel):
    """Deduplicated entities per category, in first-seen order."""
    model_config = {"frozen": True}

    columns: List[Tuple[str, str]] = Field(default_factory=list)
    values: List[Tuple[str, str, str]] = Field(default_factory=list)
    descriptions: List[DescriptionEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _no_duplicates(self) -> "RetrievedEntities":
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate (table, column) pairs")
        if len(set(self.values)) != len(self.values):
            raise ValueError("duplicate (table, column, value) entries")
        return self

    @property
    def is_empty(self) -> bool:
        return not (self.columns or self.values or self.descriptions)

    def values_for(self, table: str, column: str) -> List[str]:
        return [v for t, c, v in self.values if t == table and c == column]
