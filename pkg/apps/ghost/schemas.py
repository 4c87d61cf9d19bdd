"""
Schemas for the ghost app.
Pydantic models for placement layouts and the GhostSpec document.
"""
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import Field, model_validator

from apps.core.schemas import Schema


# =============================================================================
# Placement layouts
# =============================================================================

class ContiguousLayout(Schema):
    """n consecutive neurons of one hidden layer, starting at start."""
    kind: Literal['contiguous'] = 'contiguous'
    layer: int = Field(ge=0)
    start: int = Field(default=0, ge=0)
    n: int = Field(ge=1)


class BlocksLayout(Schema):
    """Inclusive (layer, start, end) blocks, e.g. [(2, 0, 24), (2, 2023, 2047)]."""
    kind: Literal['blocks'] = 'blocks'
    blocks: List[Tuple[int, int, int]] = Field(min_length=1)

    @model_validator(mode='after')
    def check_blocks(self):
        for layer, start, end in self.blocks:
            if layer < 0 or start < 0 or end < start:
                raise ValueError(f"invalid block ({layer}, {start}, {end})")
        return self


class RandomLayout(Schema):
    """n neurons drawn without replacement from the listed layers."""
    kind: Literal['random'] = 'random'
    n: int = Field(ge=1)
    layers: List[int] = Field(min_length=1)
    seed: int = 0


class LayeredLayout(Schema):
    """
    n neurons split across the listed layers (contiguous from neuron 0 in each).
    The remainder of an uneven split goes to the later layers: 50 over three
    layers gives 16, 17, 17.
    """
    kind: Literal['layered'] = 'layered'
    n: int = Field(ge=1)
    layers: List[int] = Field(min_length=1)


Layout = Annotated[
    Union[ContiguousLayout, BlocksLayout, RandomLayout, LayeredLayout],
    Field(discriminator='kind'),
]


# =============================================================================
# GhostSpec document
# =============================================================================

class GhostSpecDocument(Schema):
    """Serialized GhostSpec: one entry per placement in placements, v_s and band."""
    placements: List[Tuple[int, int]]
    v_s: List[float]
    band: List[Tuple[float, float]]
    layout: Optional[Layout] = None
    seed: Optional[int] = None
    target_prob: Optional[float] = None

    @model_validator(mode='after')
    def check_lengths(self):
        if not (len(self.placements) == len(self.v_s) == len(self.band)):
            raise ValueError("placements, v_s and band must have the same length")
        return self
