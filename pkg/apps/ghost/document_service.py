"""
GhostSpec persistence.

The spec travels with every run as ghost_spec.json so a trigger calibrated
once can be reused by later runs and sweeps.
"""
import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from apps.core.exceptions import ConfigNotFoundError, InvalidConfigError
from apps.core.schemas import as_config_error
from .dtos import GhostSpec, Placement
from .schemas import GhostSpecDocument

logger = logging.getLogger(__name__)


def spec_to_document(spec: GhostSpec, seed: Optional[int] = None) -> GhostSpecDocument:
    return GhostSpecDocument(
        placements=[tuple(p) for p in spec.placements],
        v_s=list(spec.clamp_values),
        band=[tuple(b) for b in spec.bands],
        layout=spec.layout,
        seed=seed,
        target_prob=spec.target_prob,
    )


def spec_from_document(document: GhostSpecDocument) -> GhostSpec:
    return GhostSpec(
        placements=tuple(Placement(*p) for p in document.placements),
        clamp_values=tuple(document.v_s),
        bands=tuple(tuple(b) for b in document.band),
        layout=document.layout,
        target_prob=document.target_prob,
    )


def write_spec(spec: GhostSpec, path, seed: Optional[int] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec_to_document(spec, seed).model_dump_json(indent=2))
    logger.info(f"Wrote ghost spec with {spec.n} placements to {path}")
    return path


def read_spec(path) -> GhostSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigNotFoundError(f"ghost spec {path} does not exist")
    try:
        document = GhostSpecDocument.model_validate(json.loads(path.read_text()))
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{path} is not valid JSON: {e}", field="ghost")
    except ValidationError as e:
        raise as_config_error(e, prefix="ghost")
    return spec_from_document(document)
