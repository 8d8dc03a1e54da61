"""Deterministic, hierarchically derivable random streams.

A stream is a *value* (root seed plus a path of child indices), not a mutable
generator.  Deriving ``generator()`` twice from the same stream yields the
same sample sequence, which is what makes every sampling operation in this
package replayable.  Distinct paths give statistically independent streams, so
replicate ``k`` of campaign ``j`` is addressable as ``root.child(j, k)``
without generating any predecessors -- the property that makes parallel
campaigns deterministic regardless of scheduling.

Derivation is counter-based: ``numpy.random.SeedSequence`` hashes
``(root_seed, path)`` into a key for the Philox bit generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngStream"]

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for one deterministic random stream.

    Parameters
    ----------
    root_seed:
        64-bit campaign seed.
    path:
        Child indices (each a 32-bit integer), e.g. campaign -> replicate ->
        coefficient -> step.  The empty path is the root stream.
    """

    root_seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.root_seed) < 2**64:
            raise ValueError(f"root_seed must fit in 64 bits, got {self.root_seed!r}")
        for idx in self.path:
            if not 0 <= int(idx) < 2**32:
                raise ValueError(f"path indices must fit in 32 bits, got {idx!r}")
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))

    def child(self, *indices: int) -> "RngStream":
        """Derive the sub-stream at ``path + indices``."""
        return RngStream(self.root_seed, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def standard_complex_normals(self, n: int) -> np.ndarray:
        """First ``n`` draws of this stream as CN(0,1) variates.

        CN(0,1) means real and imaginary parts are independent N(0, 1/2),
        so E|z|^2 = 1.
        """
        g = self.generator()
        x = g.standard_normal(2 * n) * _SQRT_HALF
        return x[0::2] + 1j * x[1::2]
