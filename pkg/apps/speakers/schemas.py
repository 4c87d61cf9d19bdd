"""
Schemas for the speakers app.
Pydantic models for synthetic generation and client partitioning.
"""
from typing import Literal

from pydantic import Field

from apps.core.schemas import Schema


class SynthConfig(Schema):
    enrolled_classes: int = Field(default=20, ge=1)
    imposter_classes: int = Field(default=2, ge=1)
    dim: int = Field(default=64, ge=1)
    samples_per_class: int = Field(default=100, ge=1)
    # 0 is accepted: every sample is then its class center
    cluster_std: float = Field(default=0.15, ge=0.0)
    seed: int = 0


class PartitionPlan(Schema):
    scheme: Literal['iid_round_robin', 'dirichlet'] = 'iid_round_robin'
    alpha: float = Field(default=1.0, gt=0.0)
    n_clients: int = Field(default=30, ge=1)
    seed: int = 0
