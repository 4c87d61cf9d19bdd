"""
Schemas for the experiments app.

The experiment config document. Every section maps to one domain config;
unknown fields anywhere are rejected.

    {
      "data": {"synth": {...}, "path": null, "train_frac": 0.8, "osi_frac": 0.1,
               "partition": {"scheme": "iid_round_robin", "alpha": 1.0}},
      "model": {"dims": [64, 128, 128, 128, 20], "hidden_activation": "relu"},
      "round": {... RoundConfig ..., "aggregator": {"rule": "fedavg", ...}},
      "ghost": {"layout": {"kind": "contiguous", "layer": 2, "n": 10}, "mode": "quantile",
                "target_prob": 0.005},
      "decision": {"theta": 0.5},
      "seed": 0,
      "output": null
    }
"""
from typing import List, Literal, Optional

from pydantic import Field

from apps.core.schemas import Schema
from apps.evaluation.schemas import DecisionConfig
from apps.fedsim.schemas import RoundConfig
from apps.ghost.schemas import ContiguousLayout, Layout
from apps.speakers.schemas import SynthConfig


class PartitionSection(Schema):
    """Client count comes from round.pool_size and the seed from the master seed."""
    scheme: Literal['iid_round_robin', 'dirichlet'] = 'iid_round_robin'
    alpha: float = Field(default=1.0, gt=0.0)


class DataSection(Schema):
    synth: SynthConfig = SynthConfig()
    # A dataset file replaces synthetic generation when set
    path: Optional[str] = None
    train_frac: float = Field(default=0.8, gt=0.0, lt=1.0)
    osi_frac: float = Field(default=0.1, ge=0.0, lt=1.0)
    partition: PartitionSection = PartitionSection()


class ModelSection(Schema):
    dims: List[int] = Field(default_factory=lambda: [64, 128, 128, 128, 20], min_length=3)
    hidden_activation: Literal['relu', 'leaky_relu'] = 'relu'


class GhostSection(Schema):
    layout: Layout = ContiguousLayout(layer=2, start=0, n=10)
    mode: Literal['quantile', 'fixed'] = 'quantile'
    target_prob: float = Field(default=0.005, gt=0.0, le=1.0)
    # quantile mode: 'upper' puts the band in the high tail with V_s at its top, 'mode' on the densest window
    band_strategy: Literal['mode', 'upper'] = 'upper'
    # Swap constant or mostly-zero neurons for the nearest usable one in the same layer
    skip_inactive: bool = True
    # fixed mode
    v_s: float = 0.5
    half_width: float = Field(default=0.1, ge=0.0)
    profile_source: Literal['train', 'adversary_shards'] = 'train'
    # Reuse a ghost_spec.json instead of calibrating
    spec_path: Optional[str] = None


class ExperimentConfig(Schema):
    data: DataSection = DataSection()
    model: ModelSection = ModelSection()
    round: RoundConfig = RoundConfig()
    ghost: Optional[GhostSection] = GhostSection()
    decision: DecisionConfig = DecisionConfig()
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: Optional[str] = None
