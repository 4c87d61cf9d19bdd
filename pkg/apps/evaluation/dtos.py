"""DTOs for the evaluation app."""
from dataclasses import dataclass, fields
from typing import Optional

from apps.ghost.dtos import GhostSpec
from apps.speakers.dtos import SpeakerDataset
from .schemas import DecisionConfig

IMPOSTER = -1


@dataclass(frozen=True)
class MetricsRecord:
    """
    Metrics after one round.

    asr_natural is None when no evaluation row triggers naturally. tr and
    asr_forced are None for runs without a ghost spec.
    """
    round: int
    ba: float
    tr: Optional[float]
    asr_natural: Optional[float]
    asr_forced: Optional[float]
    osi_far: float
    osi_frr: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True, eq=False)
class EvaluationSuite:
    """Everything a per-round evaluation needs besides the network."""
    test: SpeakerDataset
    osi_set: SpeakerDataset
    spec: Optional[GhostSpec]
    target_label: int
    decision: DecisionConfig = DecisionConfig()
