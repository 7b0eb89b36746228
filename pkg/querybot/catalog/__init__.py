"""Database catalog: schemas, values, descriptions, and the value index"""
from querybot.catalog.models import (
    ColumnSchema,
    DatabaseCatalog,
    DescriptionEntry,
    ForeignKey,
    TableSchema,
)
from querybot.catalog.loader import CatalogLimits, load_database, load_descriptions
from querybot.catalog.indexer import build_value_index
from querybot.catalog.store import CatalogStore, artifact_key, file_sha256

__all__ = [
    "ColumnSchema",
    "DatabaseCatalog",
    "DescriptionEntry",
    "ForeignKey",
    "TableSchema",
    "CatalogLimits",
    "load_database",
    "load_descriptions",
    "build_value_index",
    "CatalogStore",
    "artifact_key",
    "file_sha256",
]
