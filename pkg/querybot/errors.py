"""Exception hierarchy shared by every querybot module"""
from typing import List, Optional, Sequence


class QueryBotError(Exception):
    """Root of all querybot errors"""


class ConfigError(QueryBotError, ValueError):
    """Invalid run configuration"""


# ── Catalog ───────────────────────────────────────────────────────────────────

class CatalogError(QueryBotError):
    """Database ingestion failed"""


class UnreadableDatabaseError(CatalogError):
    """Database file missing, unreadable, or not SQLite"""


class EmptyDatabaseError(CatalogError):
    """Database opened fine but holds zero user tables"""


class ConsistencyError(QueryBotError):
    """An entity does not resolve against its catalog"""


class UnknownDatabaseError(QueryBotError, KeyError):
    """db_id not found among the indexed databases"""

    def __init__(self, db_id: str, available: Sequence[str]):
        self.db_id = db_id
        self.available = sorted(available)
        super().__init__(db_id)

    def __str__(self) -> str:
        listed = ", ".join(self.available) or "(none)"
        return f"unknown db_id '{self.db_id}'; available: {listed}"


class MissingDatabasesError(QueryBotError):
    """Benchmark items reference databases that are not present"""

    def __init__(self, missing: Sequence[str]):
        self.missing = sorted(set(missing))
        super().__init__(f"missing databases: {', '.join(self.missing)}")


# ── UQU ───────────────────────────────────────────────────────────────────────

class UquParseError(QueryBotError, ValueError):
    """Model output could not be turned into a valid decomposition/keyword set"""

    def __init__(self, message: str, raw: str = "", violations: Optional[List[str]] = None):
        self.raw = raw
        self.violations = list(violations or [])
        if self.violations:
            message = f"{message}: {'; '.join(self.violations)}"
        super().__init__(message)


class UnknownStyleError(QueryBotError, ValueError):
    """Unsupported fine-tuning export style"""


# ── Retrieval ─────────────────────────────────────────────────────────────────

class RetrievalError(QueryBotError):
    """First- or second-stage retrieval failed"""


class EmbedderUnavailableError(RetrievalError):
    """No embedder reachable and no cached vectors to fall back on"""


# ── Generation ────────────────────────────────────────────────────────────────

class PromptBuildError(QueryBotError):
    """Retrieved entities do not match the catalog"""


class SqlExtractionError(QueryBotError):
    """No SQL statement could be extracted from the model response"""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class RevisionRefusedError(QueryBotError):
    """Revision requested past the configured cap"""


class PipelineError(QueryBotError):
    """Stage-labelled wrapper around an upstream failure"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


# ── Evaluation ────────────────────────────────────────────────────────────────

class InvalidGoldError(QueryBotError):
    """Gold SQL failed to execute; the item is excluded from EX"""

    def __init__(self, message: str):
        self.engine_message = message
        super().__init__(f"gold SQL failed: {message}")


class JudgeScoreError(QueryBotError, ValueError):
    """Judge response did not contain a score in [1, 5]"""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


# ── Transport ─────────────────────────────────────────────────────────────────

class TransportError(QueryBotError):
    """Remote service call failed after all retries"""

    def __init__(self, message: str, attempts: Optional[List[str]] = None, retryable: bool = True):
        self.reason = message
        self.attempts = list(attempts or [])
        self.retryable = retryable
        suffix = f" (attempts: {len(self.attempts)})" if self.attempts else ""
        super().__init__(message + suffix)
