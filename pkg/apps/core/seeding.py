"""
Splittable seed derivation.

Every random stream in a run is derived from the master seed plus a stream tag
and a path of indices, through numpy's SeedSequence spawn keys:

    round_seed  = derive_seed(master, Stream.ROUND, round_index)
    client_seed = derive_seed(master, Stream.CLIENT, round_index, client_id)

Two different paths never share a stream, and the same path always yields the
same seed, independent of execution order.
"""
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    INIT = 0
    POOL = 1
    ROUND = 2
    CLIENT = 3
    AGGREGATE = 4
    SPLIT = 5
    PARTITION = 6
    LAYOUT = 7


def derive_seed(master: int, stream: int, *indices: int) -> int:
    """Derive a 63-bit seed for the stream identified by (stream, *indices)."""
    spawn_key = (int(stream),) + tuple(int(i) for i in indices)
    sequence = np.random.SeedSequence(entropy=int(master), spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def rng_for(master: int, stream: int, *indices: int) -> np.random.Generator:
    """Convenience wrapper returning a Generator seeded by derive_seed."""
    return np.random.default_rng(derive_seed(master, stream, *indices))
