"""Generation and execution data types"""
from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from querybot.config import MAX_REVISION_THRESHOLD
from querybot.prompts import load_template, render

Provenance = Literal["initial", "revised"]
ExecutionStatus = Literal["ok", "sql-error", "timeout"]
FinalStatus = Literal["ok", "exhausted"]


class GenerationPrompt(BaseModel):
    """Four-part generation prompt."""
    model_config = {"frozen": True}

    schema_section: str
    reasoning_section: str
    constraints_section: str
    incentives_section: str

    @model_validator(mode="after")
    def _all_sections(self) -> "GenerationPrompt":
        for name in ("schema_section", "reasoning_section", "constraints_section", "incentives_section"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} is empty")
        return self

    def render(self, template: Optional[str] = None) -> str:
        return render(
            template or load_template("generation"),
            schema=self.schema_section,
            reasoning=self.reasoning_section,
            constraints=self.constraints_section,
            incentives=self.incentives_section,
        )


class SqlCandidate(BaseModel):
    model_config = {"frozen": True}

    sql: str
    iteration: int = Field(0, ge=0, le=MAX_REVISION_THRESHOLD)
    provenance: Provenance = "initial"

    @field_validator("sql")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("sql must not be empty")
        return value.strip()


class ExecutionOutcome(BaseModel):
    """Result of running one statement. Only the fields implied by `status` are set."""
    model_config = {"frozen": True}

    status: ExecutionStatus
    rows: Optional[List[Tuple[Any, ...]]] = None
    columns: Optional[List[str]] = None
    error_message: Optional[str] = None
    elapsed: float = Field(0.0, ge=0.0, description="Seconds")

    @model_validator(mode="after")
    def _fields_match_status(self) -> "ExecutionOutcome":
        if self.status == "ok":
            if self.rows is None or self.error_message is not None:
                raise ValueError("ok outcome needs rows and no error_message")
        elif self.status == "sql-error":
            if self.error_message is None or self.rows is not None:
                raise ValueError("sql-error outcome needs error_message and no rows")
        elif self.rows is not None or self.error_message is not None:
            raise ValueError("timeout outcome carries neither rows nor error_message")
        return self

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def feedback(self) -> str:
        """Text fed back to the reviser."""
        if self.status == "sql-error":
            return self.error_message or ""
        if self.status == "timeout":
            return f"query timed out after {self.elapsed:.1f}s"
        return "query returned no rows" if not self.rows else ""


class TraceStep(BaseModel):
    candidate: SqlCandidate
    outcome: ExecutionOutcome
    prompt: str = ""
    response: str = ""


class RevisionTrace(BaseModel):
    """Every candidate tried for one question, in order."""
    steps: List[TraceStep] = Field(default_factory=list, max_length=MAX_REVISION_THRESHOLD + 1)
    final_status: FinalStatus = "exhausted"

    @model_validator(mode="after")
    def _final_matches_last(self) -> "RevisionTrace":
        if self.steps:
            expected = "ok" if self.steps[-1].outcome.ok else "exhausted"
            if self.final_status != expected:
                raise ValueError(f"final_status {self.final_status} disagrees with last outcome ({expected})")
        return self

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> Optional[TraceStep]:
        return self.steps[-1] if self.steps else None
