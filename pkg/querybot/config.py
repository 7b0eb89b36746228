"""Configuration management for Querybot"""
import json
import os
import re
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from querybot.errors import ConfigError

MAX_REVISION_THRESHOLD = 5


class Settings(BaseSettings):
    """Process-level settings read from the environment / .env"""
    model_config = {"env_file": ".env", "case_sensitive": True, "extra": "ignore"}

    QUERYBOT_CONFIG: Optional[str] = None
    QUERYBOT_CACHE_DIR: str = ".querybot_cache"
    QUERYBOT_LOG_LEVEL: str = "INFO"
    LLM_API_KEY: Optional[str] = None
    EMBEDDING_API_KEY: Optional[str] = None
    RERANKER_API_KEY: Optional[str] = None


settings = Settings()


# ── Run configuration ─────────────────────────────────────────────────────────

class EndpointConfig(BaseModel):
    """One remote model: which model, where, and how to call it"""
    model_id: str = "mock"
    endpoint: Optional[str] = Field(None, description="Base URL of an OpenAI-compatible API")
    api_key_env: str = Field("LLM_API_KEY", description="Env var holding the bearer token")
    temperature: float = Field(0.0, ge=0.0, le=2.0)
    max_tokens: int = Field(1024, ge=1)
    timeout_s: float = Field(60.0, gt=0)

    def api_key(self) -> Optional[str]:
        return os.getenv(self.api_key_env) or getattr(settings, self.api_key_env, None)


class RetryPolicy(BaseModel):
    max_attempts: int = Field(3, ge=1, le=10)
    base_delay_s: float = Field(0.5, ge=0.0)
    max_delay_s: float = Field(8.0, ge=0.0)

    def delay(self, attempt: int) -> float:
        """Backoff before retry number `attempt` (1-based)."""
        return min(self.base_delay_s * (2 ** (attempt - 1)), self.max_delay_s)


class ModelPrice(BaseModel):
    prompt_per_1k: float = Field(0.0, ge=0.0)
    completion_per_1k: float = Field(0.0, ge=0.0)


class PipelineConfig(BaseModel):
    """Everything a run needs besides the question itself"""
    model_config = {"extra": "forbid"}

    uqu: EndpointConfig = Field(default_factory=EndpointConfig)
    generation: EndpointConfig = Field(default_factory=EndpointConfig)
    revision: EndpointConfig = Field(default_factory=EndpointConfig)
    judge: EndpointConfig = Field(default_factory=EndpointConfig)
    embedder: EndpointConfig = Field(
        default_factory=lambda: EndpointConfig(model_id="hashing-256", api_key_env="EMBEDDING_API_KEY")
    )
    reranker: EndpointConfig = Field(
        default_factory=lambda: EndpointConfig(model_id="lexical", api_key_env="RERANKER_API_KEY")
    )

    scorer: Literal["minhash", "bm25"] = "minhash"
    num_permutations: int = Field(128, ge=16)
    max_values_per_column: int = Field(5000, ge=1)
    include_views: bool = False
    top_k_first: int = Field(5, ge=1)
    top_k_final: int = Field(2, ge=1)
    description_query: Literal["keyword", "question"] = "keyword"
    bm25_k1: float = Field(1.2, ge=0.0)
    bm25_b: float = Field(0.75, ge=0.0, le=1.0)
    rerank_weights: tuple[float, float] = (0.5, 0.5)

    revision_threshold: int = 3
    revise_on_empty: bool = False
    sql_timeout_s: float = Field(30.0, gt=0)

    use_uqu: bool = True
    use_retrieval: bool = True
    use_revision: bool = True

    judge_enabled: bool = True
    ex_mode: Literal["multiset", "set"] = "multiset"

    cache_dir: str = Field(default_factory=lambda: settings.QUERYBOT_CACHE_DIR)
    seed: int = 42
    workers: int = Field(4, ge=1)
    retry: RetryPolicy = Field(default_factory=RetryPolicy)
    prices: Dict[str, ModelPrice] = Field(default_factory=dict)
    mock_transcript: Optional[str] = None

    @field_validator("revision_threshold")
    @classmethod
    def _check_threshold(cls, value: int) -> int:
        if not 1 <= value <= MAX_REVISION_THRESHOLD:
            raise ValueError(f"revision_threshold must be within [1, {MAX_REVISION_THRESHOLD}], got {value}")
        return value

    @model_validator(mode="after")
    def _check_top_k(self) -> "PipelineConfig":
        if self.top_k_final > self.top_k_first:
            raise ValueError(f"top_k_final ({self.top_k_final}) exceeds top_k_first ({self.top_k_first})")
        return self

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir)


# ── Loading ───────────────────────────────────────────────────────────────────

_ENV_REF = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


def interpolate_env(value: Any, environ: Optional[Mapping[str, str]] = None) -> Any:
    """Replace ${VAR} / ${VAR:-default} in every string of a JSON-like tree."""
    env = os.environ if environ is None else environ
    if isinstance(value, str):
        def _sub(match: re.Match) -> str:
            name, default = match.group(1), match.group(2)
            if name in env:
                return env[name]
            if default is not None:
                return default
            raise ConfigError(f"environment variable '{name}' is not set")
        return _ENV_REF.sub(_sub, value)
    if isinstance(value, dict):
        return {k: interpolate_env(v, env) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate_env(v, env) for v in value]
    return value


def _set_dotted(tree: Dict[str, Any], dotted: str, value: Any) -> None:
    node = tree
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> PipelineConfig:
    """
    Build a PipelineConfig from an optional JSON file plus CLI overrides.

    Overrides use dotted keys ("generation.model_id") and win over file values;
    None-valued overrides are ignored so unset flags keep the file value.
    """
    path = path or settings.QUERYBOT_CONFIG
    raw: Dict[str, Any] = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        raw = interpolate_env(raw, environ)

    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(raw, key, value)

    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as exc:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) or "<root>" for err in exc.errors())
        raise ConfigError(f"invalid configuration ({fields}): {exc}") from exc
