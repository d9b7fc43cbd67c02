"""Deterministic random streams keyed by integer tuples.

All stochastic routines draw from Philox generators keyed by tuples such as
``(seed, chain_index)``. Philox is counter based, so the stream for one key
never depends on how many other streams exist, in which order they are
consumed, or on which thread consumes them. Within a stream, partitioning
draws into calls does not change the values: ``g.random(3)`` followed by
``g.random(2)`` yields the same numbers as one ``g.random(5)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_SEED_MAX = 2**64


def check_seed(seed) -> int:
    """Validate and return a seed as a 64-bit unsigned integer."""
    s = int(seed)
    if not 0 <= s < _SEED_MAX:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return s


def stream(*key: int) -> np.random.Generator:
    """Return the Philox generator for an integer key tuple."""
    if not key:
        raise ValidationError("stream key must contain at least one integer")
    seq = np.random.SeedSequence([int(k) for k in key])
    return np.random.Generator(np.random.Philox(seq))
