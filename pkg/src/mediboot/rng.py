"""Reproducible random number streams.

Streams are built on numpy's counter-based Philox generator keyed by a
(seed, stream_id, path) tuple through SeedSequence. Two streams with the
same key produce bit-identical draw sequences no matter how the work is
scheduled across processes, which is what makes the Monte Carlo harness
independent of the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Identical (seed, stream_id, path) always reproduce the same sequence.
    Child streams extend the path, so every bootstrap level and replication
    index can own a disjoint stream derived from one master seed.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default_factory=tuple)

    def child(self, *keys: int) -> "RngStream":
        """Derive a sub-stream by appending integer keys to the path."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))
