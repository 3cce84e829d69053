"""
Exact sampling of M(t) at a fixed t.

A draw is made in two stages: the sum h is drawn by inverse CDF over the marginal
law (log-space accumulation up to a certified truncation bound), then h is split
into m counts by a multinomial with cell probabilities lambda_i / s(lambda).

Random streams come from `stream(seed, *key)`: numpy's SeedSequence with the
key as spawn_key, feeding a Philox counter-based generator. The same seed and key
always give the same stream; distinct keys give independent streams.
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from .errors import DomainError, SamplingError
from .models import LatticePoint, ModelParams, SampleBatch
from .process_model import marginal_sum_log_pmf, truncation_bound

logger = logging.getLogger(__name__)

SAMPLER_TAIL = 1e-15


def stream(seed: int, *key: int) -> np.random.Generator:
    """
    Independent random stream for (seed, key...).

    Args:
        seed: 64-bit unsigned seed
        key: Replication coordinates, e.g. (t_index, replication_index)

    Returns:
        np.random.Generator: Philox-backed generator
    """
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


class SumSampler:
    """Inverse-CDF table for the marginal law of s(M(t))."""

    def __init__(self, p: ModelParams, t: float):
        self.params = p
        self.t = t
        self.max_sum = truncation_bound(p, t, tail=SAMPLER_TAIL)
        log_pmf = np.asarray(marginal_sum_log_pmf(p, t, np.arange(self.max_sum + 1)))
        self.cdf = np.exp(np.logaddexp.accumulate(log_pmf))
        logger.debug("Sum sampler for nu=%s, t=%s covers h <= %d", p.nu, t, self.max_sum)

    def draw(self, rng: np.random.Generator, size: int = None):
        u = rng.random(size)
        h = np.searchsorted(self.cdf, u, side="right")
        if np.any(h > self.max_sum):
            raise SamplingError(
                f"uniform draw beyond the certified CDF mass {self.cdf[-1]!r} at H={self.max_sum}"
            )
        return h


@lru_cache(maxsize=64)
def sum_sampler(p: ModelParams, t: float) -> SumSampler:
    return SumSampler(p, t)


def sample_sum(p: ModelParams, t: float, rng: np.random.Generator) -> int:
    """Draw h = s(M(t)) from the marginal law."""
    return int(sum_sampler(p, t).draw(rng))


def sample_vector(p: ModelParams, t: float, rng: np.random.Generator) -> LatticePoint:
    """Draw M(t): the sum first, then a multinomial split with probabilities lambda_i / s(lambda)."""
    h = sample_sum(p, t, rng)
    counts = rng.multinomial(h, p.weights)
    return LatticePoint(k=tuple(int(c) for c in counts))


def draw_vectors(p: ModelParams, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws of M(t) as an (n, m) integer array."""
    if n < 0:
        raise DomainError("n must be non-negative")
    sums = sum_sampler(p, t).draw(rng, n)
    return rng.multinomial(sums, p.weights)


def sample_batch(p: ModelParams, t: float, n: int, seed: int, key: Tuple[int, ...] = ()) -> SampleBatch:
    """Seeded batch of n i.i.d. draws; identical arguments reproduce identical draws."""
    draws = draw_vectors(p, t, n, stream(seed, *key))
    return SampleBatch(params=p, t=t, seed=seed, draws=draws)
