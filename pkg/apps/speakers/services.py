"""
Core services for the speakers app.

Synthetic speaker clusters, the train/test/OSI split and client partitioning.
Everything is deterministic per seed.
"""
import logging
from typing import List, Tuple

import numpy as np

from apps.core.exceptions import InvalidConfigError, InvalidInputError
from .dtos import SpeakerDataset
from .schemas import PartitionPlan, SynthConfig

logger = logging.getLogger(__name__)


def generate_synthetic(config: SynthConfig) -> SpeakerDataset:
    """
    One Gaussian cluster per speaker around a center on the unit sphere.

    Rows are class-major: enrolled classes first, then imposter classes, each
    contributing samples_per_class rows.
    """
    rng = np.random.default_rng(config.seed)
    total_classes = config.enrolled_classes + config.imposter_classes
    centers = rng.normal(size=(total_classes, config.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    features, labels, enrolled = [], [], []
    for c in range(total_classes):
        noise = rng.normal(0.0, config.cluster_std, size=(config.samples_per_class, config.dim))
        features.append(centers[c] + noise)
        is_enrolled = c < config.enrolled_classes
        labels.append(np.full(config.samples_per_class, c if is_enrolled else config.enrolled_classes))
        enrolled.append(np.full(config.samples_per_class, is_enrolled))

    ds = SpeakerDataset(
        features=np.concatenate(features),
        labels=np.concatenate(labels),
        enrolled=np.concatenate(enrolled),
        n_classes=config.enrolled_classes,
    )
    logger.info(
        f"Generated {len(ds)} rows: {config.enrolled_classes} enrolled and "
        f"{config.imposter_classes} imposter speakers, d={config.dim}"
    )
    return ds


def split_train_test_osi(
    ds: SpeakerDataset,
    train_frac: float = 0.8,
    osi_frac: float = 0.1,
    seed: int = 0,
) -> Tuple[SpeakerDataset, SpeakerDataset, SpeakerDataset]:
    """
    Split into train, test and an OSI set.

    round(osi_frac * enrolled speakers) speakers are withheld entirely and join
    the imposter rows in the OSI set, relabeled as imposters. The remaining
    enrolled rows are split per class, at least one row on each side.
    """
    if not 0.0 < train_frac < 1.0:
        raise InvalidConfigError(f"train_frac {train_frac} not in (0, 1)", field="data.train_frac")
    if not 0.0 <= osi_frac < 1.0:
        raise InvalidConfigError(f"osi_frac {osi_frac} not in [0, 1)", field="data.osi_frac")

    rng = np.random.default_rng(seed)
    classes = np.unique(ds.labels[ds.enrolled])
    n_reserved = int(round(osi_frac * classes.size))
    if n_reserved >= classes.size and classes.size > 0:
        raise InvalidConfigError(f"osi_frac {osi_frac} withholds every enrolled speaker", field="data.osi_frac")
    reserved = np.sort(rng.choice(classes, size=n_reserved, replace=False)) if n_reserved else np.array([], dtype=np.int64)

    train_idx, test_idx = [], []
    for c in classes:
        if c in reserved:
            continue
        rows = np.flatnonzero(ds.enrolled & (ds.labels == c))
        if rows.size < 2:
            raise InvalidInputError(f"speaker {c} has {rows.size} rows; at least 2 are needed to split")
        rows = rng.permutation(rows)
        n_train = min(max(int(round(train_frac * rows.size)), 1), rows.size - 1)
        train_idx.append(rows[:n_train])
        test_idx.append(rows[n_train:])

    osi_mask = ~ds.enrolled | np.isin(ds.labels, reserved)
    train = ds.subset(np.sort(np.concatenate(train_idx)) if train_idx else [])
    test = ds.subset(np.sort(np.concatenate(test_idx)) if test_idx else [])
    osi_set = ds.subset(np.flatnonzero(osi_mask)).as_imposters()
    logger.info(
        f"Split {len(ds)} rows into train={len(train)} test={len(test)} osi={len(osi_set)} "
        f"(withheld speakers: {reserved.tolist()})"
    )
    return train, test, osi_set


def _fill_empty_shards(shards: List[List[int]]) -> List[List[int]]:
    """Give every empty shard one row from the currently largest shard."""
    for i, shard in enumerate(shards):
        if not shard:
            donor = max(range(len(shards)), key=lambda j: (len(shards[j]), -j))
            shard.append(shards[donor].pop())
    return shards


def partition_clients(train: SpeakerDataset, plan: PartitionPlan) -> List[np.ndarray]:
    """
    Deal train rows to plan.n_clients shards; returns sorted row positions per shard.

    iid_round_robin deals a shuffled order one row at a time. dirichlet draws,
    per class, the share each client receives from Dir(alpha). Dirichlet
    shards left empty receive one row from the largest shard, so every client
    can train.
    """
    rows = len(train)
    if plan.n_clients > rows:
        raise InvalidConfigError(
            f"{plan.n_clients} clients but only {rows} training rows", field="data.partition.n_clients"
        )
    rng = np.random.default_rng(plan.seed)

    if plan.scheme == 'iid_round_robin':
        order = rng.permutation(rows)
        return [np.sort(order[i::plan.n_clients]) for i in range(plan.n_clients)]

    shards: List[List[int]] = [[] for _ in range(plan.n_clients)]
    for c in np.unique(train.labels):
        members = rng.permutation(np.flatnonzero(train.labels == c))
        shares = rng.dirichlet(np.full(plan.n_clients, plan.alpha))
        cuts = (np.cumsum(shares)[:-1] * members.size).astype(np.int64)
        for shard, part in zip(shards, np.split(members, cuts)):
            shard.extend(int(i) for i in part)
    shards = _fill_empty_shards(shards)
    logger.debug(f"Dirichlet(alpha={plan.alpha}) shard sizes: {[len(s) for s in shards]}")
    return [np.sort(np.asarray(s, dtype=np.int64)) for s in shards]
