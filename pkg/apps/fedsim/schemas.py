"""
Schemas for the fedsim app.
Pydantic models for the round configuration and aggregation rules.
"""
from typing import Literal, Optional

from pydantic import Field, model_validator

from apps.core.schemas import Schema

AggregatorRule = Literal['fedavg', 'weighted', 'dp', 'prune', 'krum', 'multikrum', 'median', 'trimmed_mean']


class DpParams(Schema):
    clip: float = Field(default=1.0, gt=0.0)
    sigma: float = Field(default=0.01, ge=0.0)


class PruneParams(Schema):
    """Per-coordinate outlier threshold in population standard deviations."""
    k: float = Field(default=2.0, gt=0.0)


class KrumParams(Schema):
    f: int = Field(default=1, ge=0)


class MultiKrumParams(Schema):
    f: int = Field(default=1, ge=0)
    # None selects n - f - 2
    m: Optional[int] = Field(default=None, ge=1)


class TrimmedMeanParams(Schema):
    beta: float = Field(default=0.1, ge=0.0, lt=0.5)


class AggregatorConfig(Schema):
    rule: AggregatorRule = 'fedavg'
    dp: DpParams = DpParams()
    prune: PruneParams = PruneParams()
    krum: KrumParams = KrumParams()
    multikrum: MultiKrumParams = MultiKrumParams()
    trimmed_mean: TrimmedMeanParams = TrimmedMeanParams()


class RoundConfig(Schema):
    pool_size: int = Field(default=30, ge=1)
    clients_per_round: int = Field(default=10, ge=1)
    adversaries_per_round: int = Field(default=1, ge=0)
    pool_adversaries: int = Field(default=3, ge=0)
    local_epochs: int = Field(default=2, ge=0)
    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=0.001, gt=0.0)
    n_attack: int = Field(default=3, ge=0)
    target_label: int = Field(default=0, ge=0)
    # pure: every attack-round batch is poisoned; mixed: a clean step precedes each poisoned step
    attack_mode: Literal['pure', 'mixed'] = 'mixed'
    # Attack rounds only; None falls back to local_epochs / learning_rate
    attack_epochs: Optional[int] = Field(default=20, ge=0)
    attack_learning_rate: Optional[float] = Field(default=0.02, gt=0.0)
    # ghost_outputs: attack-round steps move only the weights leaving the ghost neurons
    attack_scope: Literal['all', 'ghost_outputs'] = 'ghost_outputs'
    aggregator: AggregatorConfig = AggregatorConfig()
    total_rounds: int = Field(default=60, ge=0)
    warmup_rounds: int = Field(default=5, ge=0)

    @model_validator(mode='after')
    def check_bounds(self):
        if self.adversaries_per_round > self.clients_per_round:
            raise ValueError("adversaries_per_round must not exceed clients_per_round")
        if self.clients_per_round > self.pool_size:
            raise ValueError("clients_per_round must not exceed pool_size")
        if self.pool_adversaries > self.pool_size:
            raise ValueError("pool_adversaries must not exceed pool_size")
        if self.adversaries_per_round > self.pool_adversaries:
            raise ValueError("adversaries_per_round must not exceed pool_adversaries")
        if self.clients_per_round - self.adversaries_per_round > self.pool_size - self.pool_adversaries:
            raise ValueError("pool has too few benign clients for clients_per_round")

        k = self.clients_per_round
        rule = self.aggregator.rule
        if rule in ('krum', 'multikrum'):
            params = getattr(self.aggregator, rule)
            if not params.f < k / 2 - 1:
                raise ValueError(f"aggregator.{rule}.f={params.f} requires f < clients_per_round/2 - 1")
            if rule == 'multikrum' and params.m is not None and params.m > k:
                raise ValueError("aggregator.multikrum.m must not exceed clients_per_round")
        return self
