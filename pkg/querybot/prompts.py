"""Plain-text prompt templates with {{placeholder}} substitution"""
import re
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional

from querybot.errors import PromptBuildError

TEMPLATE_DIR = Path(__file__).parent / "templates"

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")


@lru_cache(maxsize=32)
def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_template(name_or_path: str) -> str:
    """A bundled template by name ("uqu") or any template file by path."""
    candidate = Path(name_or_path)
    if candidate.suffix and candidate.exists():
        return _read(str(candidate.resolve()))
    bundled = TEMPLATE_DIR / f"{name_or_path}.txt"
    if not bundled.exists():
        raise PromptBuildError(f"no template named '{name_or_path}' in {TEMPLATE_DIR}")
    return _read(str(bundled))


def placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER.findall(template))


def require_placeholders(template: str, names: Iterable[str], label: str = "template") -> None:
    missing = sorted(set(names) - placeholders(template))
    if missing:
        raise PromptBuildError(f"{label} lacks placeholder(s): {', '.join('{{' + m + '}}' for m in missing)}")


def render(template: str, **values: Optional[str]) -> str:
    """Substitute every {{name}}; unknown names are an error, values go in verbatim."""
    def _sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise PromptBuildError(f"no value for placeholder {{{{{name}}}}}")
        return values[name] or ""
    return _PLACEHOLDER.sub(_sub, template)
