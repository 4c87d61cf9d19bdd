"""
Parameter sweeps.

A sweep is the cross product of one axis' values and a list of master seeds.
Every cell is validated up front, then dispatched through TaskService; the
summary table is written after the join barrier.

Axes:
    ghost_count    number of ghost neurons, layout kind kept
    layer          hidden layer index, or several joined by '+' (e.g. 0+2)
    distribution   contiguous | blocks2 | blocks4 | random, within the layout's first layer
    adversaries    adversarial clients per round (raises pool_adversaries if needed)
    aggregator     aggregation rule name
"""
import csv
import io
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Sequence

from apps.core.exceptions import InvalidConfigError
from apps.core.seeding import Stream, derive_seed
from apps.core.task_service import TaskService
from apps.evaluation.dtos import MetricsRecord
from apps.evaluation.metrics_service import write_atomic
from apps.ghost.schemas import BlocksLayout, ContiguousLayout, LayeredLayout, RandomLayout
from apps.ghost.services import split_evenly
from .schemas import ExperimentConfig
from .services import parse_experiment_config, resolve_output_dir

logger = logging.getLogger(__name__)

AXES = ('ghost_count', 'layer', 'distribution', 'adversaries', 'aggregator')

SUMMARY_COLUMNS = ['axis', 'value', 'seed'] + MetricsRecord.columns() + ['rounds_to_asr_0.9', 'output_dir']

_BLOCKS = re.compile(r'^blocks(\d+)$')


def _layout_count(layout) -> int:
    if isinstance(layout, BlocksLayout):
        return sum(end - start + 1 for _, start, end in layout.blocks)
    return layout.n


def _layout_layers(layout) -> List[int]:
    if isinstance(layout, ContiguousLayout):
        return [layout.layer]
    if isinstance(layout, BlocksLayout):
        return sorted({layer for layer, _, _ in layout.blocks})
    return list(layout.layers)


def _as_int(value: str, axis: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise InvalidConfigError(f"{axis} value {value!r} is not an integer", field="sweep.values")


def _with_count(layout, n: int):
    if isinstance(layout, BlocksLayout):
        return ContiguousLayout(layer=_layout_layers(layout)[0], n=n)
    return layout.model_copy(update={'n': n})


def _for_layers(layout, value: str):
    layers = [_as_int(part, 'layer') for part in value.split('+')]
    n = _layout_count(layout)
    if len(layers) == 1:
        return ContiguousLayout(layer=layers[0], n=n)
    return LayeredLayout(n=n, layers=layers)


def _distributed(layout, value: str, dims: Sequence[int], seed: int):
    n = _layout_count(layout)
    layer = _layout_layers(layout)[0]
    if layer >= len(dims) - 2:
        raise InvalidConfigError(f"layer {layer} is not a hidden layer", field="ghost.layout")
    width = dims[layer + 1]
    if value == 'contiguous':
        return ContiguousLayout(layer=layer, n=n)
    if value == 'random':
        return RandomLayout(n=n, layers=[layer], seed=derive_seed(seed, Stream.LAYOUT))
    match = _BLOCKS.match(value)
    if match is None:
        raise InvalidConfigError(f"unknown distribution {value!r}", field="sweep.values")
    n_blocks = int(match.group(1))
    if not 1 <= n_blocks <= n:
        raise InvalidConfigError(f"cannot split {n} neurons into {n_blocks} blocks", field="sweep.values")
    # Blocks start at evenly spaced offsets across the layer
    blocks = []
    for i, size in enumerate(split_evenly(n, n_blocks)):
        start = i * width // n_blocks
        blocks.append((layer, start, start + size - 1))
    return BlocksLayout(blocks=blocks)


def apply_axis(config: ExperimentConfig, axis: str, value: str) -> ExperimentConfig:
    """Return config with one axis set to value, re-validated as a whole document."""
    if axis not in AXES:
        raise InvalidConfigError(f"unknown axis {axis!r}; expected one of {', '.join(AXES)}", field="sweep.axis")
    document = config.model_dump(mode='json')

    if axis == 'adversaries':
        k = _as_int(value, axis)
        document['round']['adversaries_per_round'] = k
        document['round']['pool_adversaries'] = max(k, config.round.pool_adversaries)
    elif axis == 'aggregator':
        document['round']['aggregator']['rule'] = value
    else:
        if config.ghost is None:
            raise InvalidConfigError(f"axis {axis} needs a ghost section", field="ghost")
        layout = config.ghost.layout
        if axis == 'ghost_count':
            layout = _with_count(layout, _as_int(value, axis))
        elif axis == 'layer':
            layout = _for_layers(layout, value)
        else:
            layout = _distributed(layout, value, config.model.dims, config.seed)
        document['ghost']['layout'] = layout.model_dump(mode='json')

    return parse_experiment_config(document)


def cell_name(axis: str, value: str, seed: int) -> str:
    return f"{axis}-{value}-seed{seed}"


def build_cells(
    base: ExperimentConfig, axis: str, values: Sequence[str], seeds: Sequence[int], output_dir: Path,
) -> List[Dict[str, Any]]:
    """Validate every cell before anything runs."""
    if not values:
        raise InvalidConfigError("a sweep needs at least one value", field="sweep.values")
    if not seeds:
        raise InvalidConfigError("a sweep needs at least one seed", field="sweep.seeds")
    cells = []
    for value in values:
        for seed in seeds:
            seeded = base.model_copy(update={'seed': int(seed)})
            config = apply_axis(seeded, axis, value)
            name = cell_name(axis, value, seed)
            cells.append({
                'name': name,
                'axis': axis,
                'value': value,
                'seed': int(seed),
                'config': config.model_dump(mode='json'),
                'output_dir': str(output_dir / name),
            })
    return cells


def summary_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SUMMARY_COLUMNS, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({
            column: '' if row.get(column) is None else (repr(row[column]) if isinstance(row[column], float) else row[column])
            for column in SUMMARY_COLUMNS
        })
    return buffer.getvalue()


def run_sweep(
    base: ExperimentConfig, axis: str, values: Sequence[str], seeds: Sequence[int], output_dir=None,
) -> List[Dict[str, Any]]:
    """Run |values| x |seeds| cells and write <out>/summary.csv; returns the summary rows."""
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(base, f"sweep-{axis}")
    cells = build_cells(base, axis, values, seeds, out)
    logger.info(f"Sweep over {axis}: {len(values)} values x {len(seeds)} seeds = {len(cells)} cells -> {out}")

    task_ids = [TaskService.run_sweep_cell(cell) for cell in cells]
    rows = TaskService.collect(task_ids)

    write_atomic(out / 'summary.csv', summary_to_csv(rows))
    logger.info(f"Sweep over {axis} finished; summary at {out / 'summary.csv'}")
    return rows
