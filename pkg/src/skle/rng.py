"""Reproducible, independent random streams keyed by (seed, stream_id)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        # Philox is counter based: distinct keys give independent streams
        ss = np.random.SeedSequence([self.seed & _MASK64, self.stream_id & _MASK64])
        return np.random.Generator(np.random.Philox(ss))

    def spawn(self, k: int) -> "RngStream":
        """Child stream; children of distinct streams never collide."""
        return RngStream(self.seed, hash((self.stream_id, k)) & _MASK64)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(int(rng or 0)).generator()
    raise TypeError(f"cannot make a generator from {rng!r}")
