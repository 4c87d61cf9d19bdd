"""Schemas for the evaluation app."""
from pydantic import Field

from apps.core.schemas import Schema


class DecisionConfig(Schema):
    """Open-set threshold on the maximum softmax score; a score equal to theta is accepted."""
    theta: float = Field(default=0.5, ge=0.0, le=1.0)
