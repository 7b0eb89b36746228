"""Catalog data models: schemas, descriptions, and the catalog itself"""
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

ColumnKind = Literal["text", "numeric", "other"]


class ColumnSchema(BaseModel):
    model_config = {"frozen": True}

    name: str
    declared_type: str = ""
    kind: ColumnKind = "other"
    is_primary_key: bool = False
    sample_values: List[str] = Field(default_factory=list, description="Distinct values, sorted prefix")


class ForeignKey(BaseModel):
    model_config = {"frozen": True}

    column: str
    ref_table: str
    ref_column: Optional[str] = Field(None, description="None means the referenced table's primary key")


class TableSchema(BaseModel):
    model_config = {"frozen": True}

    name: str
    columns: List[ColumnSchema] = Field(default_factory=list)
    foreign_keys: List[ForeignKey] = Field(default_factory=list)
    is_view: bool = False

    @model_validator(mode="after")
    def _unique_columns(self) -> "TableSchema":
        seen = set()
        for column in self.columns:
            if column.name in seen:
                raise ValueError(f"duplicate column '{column.name}' in table '{self.name}'")
            seen.add(column.name)
        return self

    def column(self, name: str) -> Optional[ColumnSchema]:
        return next((c for c in self.columns if c.name == name), None)

    @property
    def primary_keys(self) -> List[str]:
        return [c.name for c in self.columns if c.is_primary_key]


class DescriptionEntry(BaseModel):
    model_config = {"frozen": True}

    table: str
    column: str
    column_description: str = ""
    value_description: str = ""

    @property
    def text(self) -> str:
        """Text that gets embedded and shown to the re-ranker."""
        return " ".join(p for p in (self.column_description, self.value_description) if p).strip()


class DatabaseCatalog(BaseModel):
    """Everything retrieval and generation know about one database."""
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    db_id: str = Field(..., min_length=1)
    db_path: str = ""
    tables: List[TableSchema] = Field(default_factory=list)
    descriptions: List[DescriptionEntry] = Field(default_factory=list)
    descriptions_skipped: int = Field(0, description="Description rows dropped during ingestion")
    value_index: Optional[Any] = Field(None, exclude=True)

    @model_validator(mode="after")
    def _check_references(self) -> "DatabaseCatalog":
        names = [t.name for t in self.tables]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate table names in catalog '{self.db_id}'")
        seen = set()
        for entry in self.descriptions:
            if not self.has_column(entry.table, entry.column):
                raise ValueError(f"description references unknown column {entry.table}.{entry.column}")
            if (entry.table, entry.column) in seen:
                raise ValueError(f"duplicate description for {entry.table}.{entry.column}")
            seen.add((entry.table, entry.column))
        return self

    def table(self, name: str) -> Optional[TableSchema]:
        return next((t for t in self.tables if t.name == name), None)

    def has_column(self, table: str, column: str) -> bool:
        schema = self.table(table)
        return schema is not None and schema.column(column) is not None

    def description_for(self, table: str, column: str) -> Optional[DescriptionEntry]:
        return next((d for d in self.descriptions if d.table == table and d.column == column), None)

    def qualified_columns(self) -> List[Tuple[str, str]]:
        return [(t.name, c.name) for t in self.tables for c in t.columns]

    def counts(self) -> Dict[str, int]:
        return {
            "tables": len(self.tables),
            "columns": sum(len(t.columns) for t in self.tables),
            "values": sum(len(c.sample_values) for t in self.tables for c in t.columns),
            "descriptions": len(self.descriptions),
        }

    def with_index(self, index: Any) -> "DatabaseCatalog":
        return self.model_copy(update={"value_index": index})
