"""
Server-side aggregation rules.

Every rule receives the client updates already sorted by client_id and
stacked into an (n, P) matrix, so results never depend on arrival order.
Krum and Multi-Krum break score ties toward the lowest client_id.
"""
import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from apps.core.exceptions import InvalidConfigError, InvalidInputError, ShapeError
from .dtos import ClientUpdate
from .schemas import AggregatorConfig

logger = logging.getLogger(__name__)


def stack_updates(updates: Sequence[ClientUpdate]) -> List[ClientUpdate]:
    if not updates:
        raise InvalidInputError("aggregation needs at least one update")
    ordered = sorted(updates, key=lambda u: u.client_id)
    length = ordered[0].delta.shape
    for update in ordered:
        if update.delta.shape != length:
            raise ShapeError(f"update of client {update.client_id} has shape {update.delta.shape}, expected {length}")
    return ordered


def fedavg(matrix: np.ndarray, **_) -> np.ndarray:
    return matrix.mean(axis=0)


def weighted(matrix: np.ndarray, counts: np.ndarray, **_) -> np.ndarray:
    if counts.sum() <= 0:
        raise InvalidInputError("weighted averaging needs a positive total sample count")
    return np.average(matrix, axis=0, weights=counts)


def dp(matrix: np.ndarray, config: AggregatorConfig, agg_seed: int, **_) -> np.ndarray:
    """Clip every delta to L2 norm C, average, add N(0, (sigma * C / n)^2) per coordinate."""
    clip, sigma = config.dp.clip, config.dp.sigma
    norms = np.linalg.norm(matrix, axis=1)
    scale = np.ones_like(norms)
    over = norms > clip
    scale[over] = clip / norms[over]
    mean = (matrix * scale[:, None]).mean(axis=0)
    noise = np.random.default_rng(agg_seed).normal(0.0, sigma * clip / matrix.shape[0], size=mean.shape)
    return mean + noise


def prune(matrix: np.ndarray, config: AggregatorConfig, **_) -> np.ndarray:
    """
    Per coordinate, drop client values farther than k population std devs from
    the cross-client mean, then average what is left. A coordinate with no
    survivors keeps the plain mean.
    """
    mu = matrix.mean(axis=0)
    sd = matrix.std(axis=0)
    keep = (np.abs(matrix - mu) <= config.prune.k * sd) | (sd == 0.0)
    kept = keep.sum(axis=0)
    sums = np.where(keep, matrix, 0.0).sum(axis=0)
    return np.where(kept > 0, sums / np.maximum(kept, 1), mu)


def krum_scores(matrix: np.ndarray, f: int, field: str) -> np.ndarray:
    """Sum of squared distances from each update to its n - f - 2 nearest neighbours."""
    n = matrix.shape[0]
    if n < f + 3:
        raise InvalidConfigError(f"{n} updates cannot tolerate f={f}; need at least f + 3", field=field)
    neighbours = n - f - 2
    scores = np.empty(n)
    for i in range(n):
        distances = np.sum((matrix - matrix[i]) ** 2, axis=1)
        scores[i] = np.sort(np.delete(distances, i))[:neighbours].sum()
    return scores


def krum(matrix: np.ndarray, config: AggregatorConfig, **_) -> np.ndarray:
    scores = krum_scores(matrix, config.krum.f, "round.aggregator.krum.f")
    return matrix[int(np.argmin(scores))].copy()


def multikrum(matrix: np.ndarray, config: AggregatorConfig, **_) -> np.ndarray:
    n = matrix.shape[0]
    f = config.multikrum.f
    scores = krum_scores(matrix, f, "round.aggregator.multikrum.f")
    m = config.multikrum.m if config.multikrum.m is not None else n - f - 2
    if not 1 <= m <= n:
        raise InvalidConfigError(f"m={m} outside [1, {n}]", field="round.aggregator.multikrum.m")
    chosen = np.sort(np.argsort(scores, kind='stable')[:m])
    return matrix[chosen].mean(axis=0)


def median(matrix: np.ndarray, **_) -> np.ndarray:
    return np.median(matrix, axis=0)


def trimmed_mean(matrix: np.ndarray, config: AggregatorConfig, **_) -> np.ndarray:
    n = matrix.shape[0]
    t = int(np.floor(config.trimmed_mean.beta * n))
    if not n > 2 * t:
        raise InvalidConfigError(f"beta trims {t} per side from {n} updates", field="round.aggregator.trimmed_mean.beta")
    return np.sort(matrix, axis=0)[t:n - t].mean(axis=0)


RULES: Dict[str, Callable[..., np.ndarray]] = {
    'fedavg': fedavg,
    'weighted': weighted,
    'dp': dp,
    'prune': prune,
    'krum': krum,
    'multikrum': multikrum,
    'median': median,
    'trimmed_mean': trimmed_mean,
}


def aggregate(updates: Sequence[ClientUpdate], config: AggregatorConfig, agg_seed: int = 0) -> np.ndarray:
    """Combine client deltas into one delta under config.rule."""
    ordered = stack_updates(updates)
    matrix = np.stack([u.delta for u in ordered])
    counts = np.array([u.sample_count for u in ordered], dtype=np.float64)
    logger.debug(f"Aggregating {len(ordered)} updates with rule={config.rule}")
    return RULES[config.rule](matrix, counts=counts, config=config, agg_seed=agg_seed)
