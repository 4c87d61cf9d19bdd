"""DTOs for the fedsim app."""
from dataclasses import dataclass

import numpy as np

from apps.speakers.dtos import SpeakerDataset


@dataclass(frozen=True, eq=False)
class ClientState:
    id: int
    shard: SpeakerDataset
    is_adversary: bool = False


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    """delta = theta_after - theta_global in flatten_parameters order."""
    delta: np.ndarray
    sample_count: int
    client_id: int
