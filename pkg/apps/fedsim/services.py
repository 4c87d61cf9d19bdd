"""
Core services for the fedsim app.

The federated loop: a fixed client pool, per-round client sampling, local
Adam training (benign or ghost-clamped), aggregation and the global update.
All randomness is derived from the master seed through apps.core.seeding.
"""
import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from apps.core.exceptions import InvalidConfigError, InvalidInputError, ShapeError
from apps.core.seeding import Stream, derive_seed, rng_for
from apps.ghost.dtos import GhostSpec
from apps.ghost.services import is_attack_round, make_override, relabel_batch
from apps.nn.dtos import GradientSet, Network
from apps.nn.services import (
    adam_step, backward, flatten_parameters, forward, init_adam, softmax_cross_entropy, unflatten_parameters,
)
from apps.speakers.dtos import SpeakerDataset
from .aggregators import aggregate
from .dtos import ClientState, ClientUpdate
from .schemas import RoundConfig

logger = logging.getLogger(__name__)

RoundHook = Callable[[int, Network], Any]


# =============================================================================
# Clients
# =============================================================================

def build_client_pool(
    train: SpeakerDataset,
    shards: Sequence[np.ndarray],
    config: RoundConfig,
    master_seed: int,
) -> List[ClientState]:
    """One client per shard; pool_adversaries of them, drawn from the POOL stream, are adversarial."""
    if len(shards) != config.pool_size:
        raise InvalidConfigError(
            f"{len(shards)} shards for a pool of {config.pool_size}", field="round.pool_size"
        )
    rng = rng_for(master_seed, Stream.POOL)
    adversaries = set(int(i) for i in rng.choice(config.pool_size, size=config.pool_adversaries, replace=False))
    pool = [
        ClientState(id=i, shard=train.subset(shard), is_adversary=i in adversaries)
        for i, shard in enumerate(shards)
    ]
    logger.info(f"Built pool of {len(pool)} clients; adversaries: {sorted(adversaries)}")
    return pool


def sample_round_clients(pool: Sequence[ClientState], config: RoundConfig, round_seed: int) -> List[ClientState]:
    """clients_per_round distinct clients, exactly adversaries_per_round adversarial, sorted by id."""
    adversaries = [c for c in pool if c.is_adversary]
    benign = [c for c in pool if not c.is_adversary]
    n_adv = config.adversaries_per_round
    n_benign = config.clients_per_round - n_adv
    if n_adv > len(adversaries):
        raise InvalidConfigError(
            f"round needs {n_adv} adversaries, pool has {len(adversaries)}", field="round.adversaries_per_round"
        )
    if n_benign > len(benign):
        raise InvalidConfigError(
            f"round needs {n_benign} benign clients, pool has {len(benign)}", field="round.clients_per_round"
        )
    rng = np.random.default_rng(round_seed)
    chosen = [adversaries[i] for i in rng.choice(len(adversaries), size=n_adv, replace=False)]
    chosen += [benign[i] for i in rng.choice(len(benign), size=n_benign, replace=False)]
    return sorted(chosen, key=lambda c: c.id)


# =============================================================================
# Local training
# =============================================================================

def _train_step(net, state, features, labels, override, mask=None):
    logits, trace = forward(net, features, override)
    _, dlogits = softmax_cross_entropy(logits, labels)
    grads = backward(net, trace, dlogits, override)
    if mask is not None:
        grads = GradientSet(
            weights=tuple(g * m for g, m in zip(grads.weights, mask.weights)),
            biases=tuple(g * m for g, m in zip(grads.biases, mask.biases)),
        )
    return adam_step(net, grads, state)


def ghost_output_mask(net: Network, ghost: GhostSpec) -> GradientSet:
    """Ones on the weights leaving each ghost neuron, zeros on every other parameter."""
    weights = [np.zeros_like(layer.weights) for layer in net.layers]
    for layer_index, neuron_index in ghost.placements:
        weights[layer_index + 1][neuron_index, :] = 1.0
    return GradientSet(
        weights=tuple(weights),
        biases=tuple(np.zeros_like(layer.bias) for layer in net.layers),
    )


def local_train(
    global_net: Network,
    client: ClientState,
    config: RoundConfig,
    ghost: Optional[GhostSpec],
    round_index: int,
    client_seed: int,
) -> ClientUpdate:
    """
    local_epochs passes of mini-batch Adam over the client's shard.

    An adversary on an attack round trains every batch with the ghost clamp
    in forward and backward and all labels set to target_label; mixed mode
    adds a clean step before each poisoned one. Attack rounds run
    attack_epochs passes at attack_learning_rate, and with the ghost_outputs
    scope only the weights leaving the ghost neurons move. Each call starts
    from a fresh optimizer state.
    """
    shard = client.shard
    if len(shard) == 0:
        raise InvalidInputError(f"client {client.id} has an empty shard")

    attacking = client.is_adversary and ghost is not None and is_attack_round(round_index, config.n_attack)
    epochs, learning_rate = config.local_epochs, config.learning_rate
    override = poisoned = mask = None
    if attacking:
        override = make_override(ghost)
        poisoned = relabel_batch(shard.labels, config.target_label, global_net.output_dim)
        if config.attack_epochs is not None:
            epochs = config.attack_epochs
        if config.attack_learning_rate is not None:
            learning_rate = config.attack_learning_rate
        if config.attack_scope == 'ghost_outputs':
            mask = ghost_output_mask(global_net, ghost)

    rng = np.random.default_rng(client_seed)
    net = global_net
    state = init_adam(net, learning_rate=learning_rate)
    for _ in range(epochs):
        order = rng.permutation(len(shard))
        for start in range(0, len(shard), config.batch_size):
            idx = order[start:start + config.batch_size]
            features = shard.features[idx]
            if not attacking:
                net, state = _train_step(net, state, features, shard.labels[idx], None)
                continue
            if config.attack_mode == 'mixed':
                net, state = _train_step(net, state, features, shard.labels[idx], None, mask)
            net, state = _train_step(net, state, features, poisoned[idx], override, mask)

    delta = flatten_parameters(net) - flatten_parameters(global_net)
    if attacking:
        logger.debug(f"Client {client.id} trained with the ghost trigger in round {round_index} for {epochs} epochs")
    return ClientUpdate(delta=delta, sample_count=len(shard), client_id=client.id)


# =============================================================================
# Global model
# =============================================================================

def apply_global_update(global_net: Network, aggregated_delta: np.ndarray) -> Network:
    """G_new = G_last + aggregated delta."""
    delta = np.asarray(aggregated_delta, dtype=np.float64)
    if delta.shape != (global_net.parameter_count,):
        raise ShapeError(
            f"delta of shape {delta.shape} does not match parameter count {global_net.parameter_count}"
        )
    return unflatten_parameters(global_net, flatten_parameters(global_net) + delta)


def run_federation(
    config: RoundConfig,
    pool: Sequence[ClientState],
    initial: Network,
    ghost: Optional[GhostSpec] = None,
    hooks: Sequence[RoundHook] = (),
    master_seed: int = 0,
    start_round: int = 0,
    n_rounds: Optional[int] = None,
) -> Tuple[Network, List[Any]]:
    """
    Run n_rounds rounds (default config.total_rounds) starting at start_round.

    Seeds: round r samples clients with derive_seed(master, ROUND, r), client c
    trains with derive_seed(master, CLIENT, r, c) and the aggregator draws from
    derive_seed(master, AGGREGATE, r). After each round every hook is called
    with (round_index, network); non-None results are returned in order.
    """
    rounds = config.total_rounds if n_rounds is None else n_rounds
    net = initial
    records: List[Any] = []
    for r in range(start_round, start_round + rounds):
        clients = sample_round_clients(pool, config, derive_seed(master_seed, Stream.ROUND, r))
        updates = [
            local_train(net, client, config, ghost, r, derive_seed(master_seed, Stream.CLIENT, r, client.id))
            for client in clients
        ]
        net = apply_global_update(net, aggregate(updates, config.aggregator, derive_seed(master_seed, Stream.AGGREGATE, r)))
        for hook in hooks:
            record = hook(r, net)
            if record is not None:
                records.append(record)
        attacked = ghost is not None and is_attack_round(r, config.n_attack) and any(c.is_adversary for c in clients)
        logger.info(f"Round {r} done: clients={[c.id for c in clients]} attack={attacked}")
    return net, records
