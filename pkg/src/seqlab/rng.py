"""Counter-based random number streams.

Every Monte-Carlo routine in this package draws from an :class:`RngStream`,
a stateless handle built on the Philox counter-based generator.  A stream is
identified by a ``(seed, stream_id)`` pair; its output is a pure function of
``(seed, stream_id, draw index)``.  Streams are cheap to derive, so each
logical draw (a chunk of replications, a sphere point, an inner power loop)
gets its own substream.  This is what makes results independent of how work
is partitioned across workers.

Standard normals are produced by applying the inverse normal CDF to the
stream's uniforms rather than by a rejection method, so the i-th normal of a
stream is always the same value no matter what was drawn before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Replication chunk size used by every Monte-Carlo loop.  Chunk i of a loop
# always uses substream i, so estimates do not depend on the worker count.
CHUNK_SIZE = 8192


def _splitmix64(x: int) -> int:
    """Finalizer of the splitmix64 generator; a good 64-bit mixing function."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for one Philox substream.

    The same stream always reproduces the same draws: calling
    :meth:`uniforms` twice returns identical arrays.  Use :meth:`substream`
    to derive independent streams for distinct logical draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not (0 <= self.stream_id <= _MASK64):
            raise ValueError("stream_id must be an unsigned 64-bit integer")

    def substream(self, index: int) -> "RngStream":
        """Derive the ``index``-th child stream of this stream."""
        child = _splitmix64((self.stream_id + _GOLDEN * ((index & _MASK64) + 1)) & _MASK64)
        return RngStream(self.seed, child)

    def _generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, shape) -> np.ndarray:
        """Uniform(0,1) draws; the value 0 is clipped away so ndtri is finite."""
        u = self._generator().random(size=shape)
        return np.clip(u, 2.0 ** -54, None)

    def normals(self, shape) -> np.ndarray:
        """Standard normal draws via the inverse CDF of the stream's uniforms."""
        return ndtri(self.uniforms(shape))


def chunk_sizes(n: int, chunk_size: int = CHUNK_SIZE):
    """Canonical chunk layout for n replications: list of (index, size)."""
    if n <= 0:
        raise ValueError("replication count must be positive")
    out = []
    start = 0
    i = 0
    while start < n:
        size = min(chunk_size, n - start)
        out.append((i, size))
        start += size
        i += 1
    return out
