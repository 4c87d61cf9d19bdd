"""DTOs for the ghost app - trigger definition values."""
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from apps.core.exceptions import InvalidConfigError
from apps.nn.dtos import ActivationOverride  # noqa: F401  (re-exported)
from .schemas import Layout


class Placement(NamedTuple):
    """A ghost neuron: layer_index 0 is the first hidden layer."""
    layer_index: int
    neuron_index: int


@dataclass(frozen=True)
class GhostSpec:
    """
    The trigger definition.

    Training clamps each placement to its exact clamp value; detection counts
    a natural activation as a hit when it lies inside the placement's band.
    """
    placements: Tuple[Placement, ...]
    clamp_values: Tuple[float, ...]
    bands: Tuple[Tuple[float, float], ...]
    layout: Optional[Layout] = None
    target_prob: Optional[float] = None

    def __post_init__(self):
        n = len(self.placements)
        if len(self.clamp_values) != n or len(self.bands) != n:
            raise InvalidConfigError("placements, clamp values and bands must have equal length", field="ghost")
        if len(set(self.placements)) != n:
            raise InvalidConfigError("ghost placements must be distinct", field="ghost.placements")
        for placement, value, (low, high) in zip(self.placements, self.clamp_values, self.bands):
            if not low <= value <= high:
                raise InvalidConfigError(
                    f"V_s {value} of {tuple(placement)} is outside its band [{low}, {high}]",
                    field="ghost.band",
                )

    @property
    def n(self) -> int:
        return len(self.placements)

    @property
    def layer_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for placement in self.placements:
            counts[placement.layer_index] = counts.get(placement.layer_index, 0) + 1
        return counts


@dataclass(frozen=True, eq=False)
class ActivationProfile:
    """Sampled activations: values[row, i] belongs to placements[i]."""
    placements: Tuple[Placement, ...]
    values: np.ndarray

    @property
    def sample_count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PredictedRates:
    """Probability model of a trigger: P_acc = prod(P_Ghost^i) * P_act and eff = 1 - P_acc."""
    per_placement: Tuple[float, ...]
    layer_counts: Dict[int, int]
    p_act: float
    p_acc: float
    eff: float
