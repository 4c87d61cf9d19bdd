"""Base schema for validated configuration documents."""
from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, ValidationError

from .exceptions import InvalidConfigError


class Schema(BaseModel):
    """
    Strict, immutable pydantic model.

    Unknown fields are a hard error so typos in sweep scripts fail loudly.
    """
    model_config = ConfigDict(extra='forbid', frozen=True)


def field_path(error: Dict[str, Any]) -> str:
    """Dotted path of a pydantic error location, e.g. round.aggregator.trimmed_mean.beta."""
    return '.'.join(str(part) for part in error.get('loc', ()))


def as_config_error(exc: ValidationError, prefix: str = '') -> InvalidConfigError:
    """Convert the first pydantic validation error into an InvalidConfigError."""
    first = exc.errors()[0]
    path = field_path(first)
    if prefix:
        path = f"{prefix}.{path}" if path else prefix
    return InvalidConfigError(first.get('msg', 'invalid value'), field=path or None)
