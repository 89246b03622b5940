"""Keyed random streams.

Every consumer of randomness gets its own Philox (counter-based) generator
derived from the experiment seed plus an integer key path, e.g.
``(replication, stage, machine)``.  Streams never depend on the order in
which they are requested, which is what makes the harness output
independent of the number of worker threads.
"""

import numpy as np

# stage tags for key paths
DATA = 0
F_DICT = 1
VAR_DICT_MS = 2
VAR_DICT_C = 3
BEST = 4
REJECT = 5
PLUGIN = 6


def stream(seed, *keys):
    """Return a fresh generator for ``seed`` and a key path of ints >= 0."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(0)
    return stream(rng)


def child_seed(rng):
    """Draw a 64-bit seed for code that carries its own generator (numba)."""
    return int(rng.integers(0, 2**63 - 1, dtype=np.int64))
