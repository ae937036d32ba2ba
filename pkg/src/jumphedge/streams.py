"""Reproducible, splittable random streams built on the Philox counter-based generator.

Each simulated path consumes its own stream derived from (master_seed, path_index),
so results are independent of how paths are distributed over workers: stream i is
the Philox generator keyed by the master seed with its 256-bit counter jumped to
block i. Distinct path indices therefore use disjoint counter ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """One path's private random stream.

    master_seed and path_index identify the stream; the underlying counter
    (exposed via the ``counter`` property) is the draw position within it.
    """

    master_seed: int
    path_index: int
    _gen: np.random.Generator = field(repr=False, default=None)

    def __post_init__(self):
        if self._gen is None:
            bitgen = np.random.Philox(key=self.master_seed % (1 << 64))
            if self.path_index:
                bitgen = bitgen.jumped(self.path_index)
            self._gen = np.random.Generator(bitgen)

    @property
    def counter(self):
        """Current 256-bit Philox counter (draw position), as an integer."""
        state = self._gen.bit_generator.state["state"]["counter"]
        return sum(int(w) << (64 * k) for k, w in enumerate(state))

    def uniforms(self, n):
        """n doubles in [0, 1). All other draws are built from these."""
        return self._gen.random(n)

    def exponentials(self, n):
        u = self._gen.random(n)
        # random() is in [0,1); flip so the log argument is in (0,1]
        return -np.log1p(-u)


def derive_stream(master_seed, path_index):
    """Deterministic per-path stream; distinct indices never overlap."""
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    return RngStream(int(master_seed), int(path_index))
