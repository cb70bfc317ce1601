"""Seeded, counter-based random streams.

Streams are numpy ``Generator`` objects over the Philox counter-based bit
generator, keyed through ``SeedSequence`` so that the output for a given
seed is identical across platforms. Child streams are derived from a parent
seed and an integer path (e.g. a trial index), which makes results
independent of how work is split across processes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RandomStream", "as_stream"]

_SEED_MASK = (1 << 64) - 1


class RandomStream:
    """Deterministic random stream identified by a 64-bit seed and a derivation path."""

    def __init__(self, seed: int = 0, path: tuple = ()):
        if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {seed!r}")
        if not 0 <= int(seed) <= _SEED_MASK:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(x) for x in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def derive(self, *keys: int) -> "RandomStream":
        """Independent child stream; depends only on ``(seed, path + keys)``."""
        return RandomStream(self.seed, self.path + tuple(keys))

    def random(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path})"


def as_stream(rng) -> RandomStream:
    """Coerce ``None``, an int seed or a stream into a :class:`RandomStream`."""
    if rng is None:
        return RandomStream(0)
    if isinstance(rng, RandomStream):
        return rng
    if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool):
        return RandomStream(int(rng))
    raise TypeError(f"expected a RandomStream or integer seed, got {type(rng).__name__}")
