"""Reproducible random-number substreams for replications.

Every stream is keyed by (seed, purpose, replication). Identical keys give
bit-identical sequences; distinct purposes or replication indices derive
statistically independent substreams (numpy SeedSequence spawn keys).
Draws are buffered in blocks, which keeps per-draw cost low in the event
loop without changing the sequence a given key produces.
"""

from __future__ import annotations

import numpy as np

# Stable purpose registry; the index is part of the substream derivation,
# so the order here must never change.
PURPOSES = ("arrivals", "initial_soc", "user_type", "target_soc", "service", "patience")

_BLOCK = 1024


class RngStream:
    """One substream of a seeded generator, with buffered scalar draws."""

    __slots__ = ("seed", "purpose", "replication", "_gen", "_exp", "_exp_i", "_uni", "_uni_i")

    def __init__(self, seed: int, purpose: str, replication: int):
        if purpose not in PURPOSES:
            raise ValueError(f"unknown stream purpose {purpose!r}; expected one of {PURPOSES}")
        if replication < 0:
            raise ValueError("replication index must be >= 0")
        self.seed = seed
        self.purpose = purpose
        self.replication = replication
        key = np.random.SeedSequence(seed, spawn_key=(replication, PURPOSES.index(purpose)))
        self._gen = np.random.Generator(np.random.PCG64(key))
        # buffers kept as plain Python lists: scalar indexing is much
        # cheaper than ndarray access in the event loop
        self._exp: list = []
        self._exp_i = 0
        self._uni: list = []
        self._uni_i = 0

    def exponential(self, rate: float) -> float:
        """One draw from Exp(rate); mean 1/rate."""
        if rate <= 0.0:
            raise ValueError(f"exponential rate must be positive, got {rate!r}")
        i = self._exp_i
        if i >= len(self._exp):
            self._exp = self._gen.standard_exponential(_BLOCK).tolist()
            i = 0
        self._exp_i = i + 1
        return self._exp[i] / rate

    def uniform(self, low: float, high: float) -> float:
        """One draw from Uniform[low, high)."""
        if not low < high:
            raise ValueError(f"uniform bounds must satisfy low < high, got [{low}, {high})")
        return low + (high - low) * self.unit()

    def pick(self, cumulative_weights) -> int:
        """Index drawn from the distribution whose CDF is `cumulative_weights`.

        The last entry must be 1 (weights normalized). Consumes exactly one
        uniform draw, so consumption stays aligned across compared runs.
        """
        u = self.unit()
        for idx, edge in enumerate(cumulative_weights):
            if u < edge:
                return idx
        return len(cumulative_weights) - 1

    def unit(self) -> float:
        """One draw from Uniform[0, 1)."""
        i = self._uni_i
        if i >= len(self._uni):
            self._uni = self._gen.random(_BLOCK).tolist()
            i = 0
        self._uni_i = i + 1
        return self._uni[i]


def sample_exponential(stream: RngStream, rate: float) -> float:
    """Inter-event delta from a Poisson process with the given per-minute rate."""
    return stream.exponential(rate)


class ReplicationStreams:
    """The purpose-tagged streams one replication owns."""

    __slots__ = ("seed", "replication", "arrivals", "initial_soc", "user_type",
                 "target_soc", "service", "patience")

    def __init__(self, seed: int, replication: int):
        self.seed = seed
        self.replication = replication
        self.arrivals = RngStream(seed, "arrivals", replication)
        self.initial_soc = RngStream(seed, "initial_soc", replication)
        self.user_type = RngStream(seed, "user_type", replication)
        self.target_soc = RngStream(seed, "target_soc", replication)
        self.service = RngStream(seed, "service", replication)
        self.patience = RngStream(seed, "patience", replication)
