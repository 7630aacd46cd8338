"""Shared Monte-Carlo machinery: chunked proportion estimates, Wilson CIs.

Every probability estimate in the package goes through
:func:`estimate_proportion`, which splits the replication budget into
fixed-size chunks with one substream per chunk.  The chunk layout depends
only on the budget, never on the worker count, so estimates are bit-identical
whether run serially or on a thread pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from .errors import InvalidInputError
from .rng import RngStream, chunk_sizes

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, n: int, z: float = Z_95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise InvalidInputError("n must be positive")
    if not (0 <= successes <= n):
        raise InvalidInputError("successes must lie in [0, n]")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n))
    # clamp so the interval always brackets phat despite rounding at 0 or n
    return min(phat, max(0.0, center - half)), max(phat, min(1.0, center + half))


@dataclass(frozen=True)
class ProportionEstimate:
    """Monte-Carlo estimate of a probability with its provenance."""

    estimate: float
    n: int
    standard_error: float
    ci_lower: float
    ci_upper: float
    seed: int
    stream_id: int

    def __post_init__(self):
        assert self.ci_lower <= self.estimate <= self.ci_upper + 1e-15


def estimate_proportion(
    count_fn: Callable[[RngStream, int], int],
    n: int,
    rng: RngStream,
    workers: int = 1,
) -> ProportionEstimate:
    """Estimate P(event) by counting over n replications.

    count_fn(stream, m) must return the number of events among m replications
    drawn from the given stream.  Chunk i always uses rng.substream(i).
    """
    chunks = chunk_sizes(n)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            counts = list(
                ex.map(lambda c: count_fn(rng.substream(c[0]), c[1]), chunks)
            )
    else:
        counts = [count_fn(rng.substream(i), m) for i, m in chunks]
    successes = int(sum(counts))
    phat = successes / n
    se = math.sqrt(phat * (1 - phat) / n)
    lo, hi = wilson_interval(successes, n)
    return ProportionEstimate(phat, n, se, lo, hi, rng.seed, rng.stream_id)
