"""Counter-based random streams for reproducible parallel sampling.

Every unit of Monte-Carlo work (one player's coalition sample, one grid
cell, one permutation chunk) draws from its own Philox stream keyed by the
master seed plus integer tags identifying the unit.  A stream's output is a
pure function of (seed, tags), so estimates cannot depend on which worker
ran the unit or in what order units were scheduled.

Domain tags are allocated here, one per consumer, so two call sites can
never collide on the same stream.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = (1 << 64) - 1

# Stream domains.  Each sampling site uses exactly one of these as its
# first tag; add new constants here rather than reusing numbers.
PIE_SAMPLES = 11
SHAPLEY_PERMUTATIONS = 12
SHARED_POOL = 13
NET_INIT = 21
TRAIN_SHUFFLE = 22
SYNTHETIC_DATA = 31
SPLIT_CLASS = 32
SPLIT_ORDER = 33
SUBSAMPLE = 34
MCUE_TRIALS = 41
MCUE_BOOTSTRAP = 42
BAND_CELL = 43
RANDOM_PRUNE = 51


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for the work unit identified by ``tags``."""
    key = np.random.SeedSequence(
        entropy=int(seed) & _SEED_MASK,
        spawn_key=tuple(int(t) & 0xFFFFFFFF for t in tags),
    )
    return np.random.Generator(np.random.Philox(key))


def derive_seed(seed: int, *tags: int) -> int:
    """Collapse (seed, tags) into a plain integer seed for a sub-run."""
    key = np.random.SeedSequence(
        entropy=int(seed) & _SEED_MASK,
        spawn_key=tuple(int(t) & 0xFFFFFFFF for t in tags),
    )
    return int(key.generate_state(1, np.uint64)[0])
