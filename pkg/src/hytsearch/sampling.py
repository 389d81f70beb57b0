"""Seeded sampling: Latin hypercube designs and uniform genome draws.

All randomness flows through numpy's PCG64 generator so that a given seed
reproduces the same stream on every platform. Callers that need parallel
streams derive child seeds with :func:`derive_seed` instead of sharing one
generator.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .space import GeneSpace, Genome, cardinality

_MASK64 = (1 << 64) - 1

# Enumerating the whole space to top up duplicates is only reasonable for
# small spaces; above this size rejection sampling is effectively certain
# to terminate anyway.
_ENUMERATION_LIMIT = 1_000_000


class InfeasiblePopulationError(ValueError):
    """More distinct genomes were requested than the space contains."""


def make_rng(seed: int) -> np.random.Generator:
    """A PCG64 generator; equal seeds give identical streams everywhere."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(parent_seed: int, index: int) -> int:
    """Mix a parent seed with a stream index (splitmix64 finalizer).

    child = mix(parent + (index + 1) * golden), where mix is the standard
    splitmix64 bit finalizer. Distinct indices give well-separated seeds.
    """
    z = (parent_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def lhs_unit(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """n stratified samples in [0, 1)^dims.

    Per dimension, the n equal-width bins [j/n, (j+1)/n) each receive
    exactly one sample: an independent random permutation assigns bins and
    a uniform jitter places the sample within its bin.
    """
    if n < 1 or dims < 1:
        raise ValueError("n and dims must both be >= 1")
    out = np.empty((n, dims), dtype=np.float64)
    for d in range(dims):
        bins = rng.permutation(n)
        jitter = rng.random(n)
        out[:, d] = (bins + jitter) / n
    return out


def _discretize(u: np.ndarray, counts: Sequence[int]) -> Genome:
    ks = np.asarray(counts)
    genes = np.minimum((u * ks).astype(np.int64), ks - 1)
    return tuple(int(g) for g in genes)


def lhs_genomes(space: GeneSpace, n: int, rng: np.random.Generator) -> list[Genome]:
    """n distinct genomes from a Latin hypercube design over the gene grid.

    Each unit sample is floored onto the per-gene index grid. Collisions
    caused by the coarse grid are replaced with uniform resamples (falling
    back to enumeration for very small spaces) until n distinct genomes
    exist.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = cardinality(space)
    if n > total:
        raise InfeasiblePopulationError(
            f"requested {n} distinct genomes from a space of {total}"
        )
    counts = space.option_counts
    u = lhs_unit(n, len(counts), rng)
    seen: dict[Genome, None] = {}
    for row in u:
        g = _discretize(row, counts)
        seen.setdefault(g, None)

    attempts = 0
    while len(seen) < n and attempts < 200 * n:
        g = uniform_genome(space, rng)
        seen.setdefault(g, None)
        attempts += 1

    if len(seen) < n and total <= _ENUMERATION_LIMIT:
        remaining = [
            g for g in itertools.product(*(range(k) for k in counts)) if g not in seen
        ]
        extra = rng.permutation(len(remaining))[: n - len(seen)]
        for i in extra:
            seen.setdefault(remaining[int(i)], None)

    genomes = list(seen.keys())[:n]
    if len(genomes) < n:
        raise InfeasiblePopulationError(
            f"could not assemble {n} distinct genomes (got {len(genomes)})"
        )
    return genomes


def uniform_genome(space: GeneSpace, rng: np.random.Generator) -> Genome:
    """One genome with every gene drawn uniformly over its options."""
    return tuple(int(rng.integers(k)) for k in space.option_counts)


def uniform_genomes_distinct(
    space: GeneSpace,
    n: int,
    rng: np.random.Generator,
    exclude: set[Genome] | None = None,
) -> list[Genome]:
    """n distinct uniform genomes, none of them in ``exclude``."""
    exclude = exclude or set()
    total = cardinality(space) - len(exclude)
    if n > total:
        raise InfeasiblePopulationError(
            f"requested {n} distinct genomes but only {total} remain"
        )
    seen: dict[Genome, None] = {}
    attempts = 0
    while len(seen) < n and attempts < max(1000, 200 * n):
        g = uniform_genome(space, rng)
        if g not in exclude:
            seen.setdefault(g, None)
        attempts += 1
    if len(seen) < n:
        if cardinality(space) <= _ENUMERATION_LIMIT:
            counts = space.option_counts
            remaining = [
                g
                for g in itertools.product(*(range(k) for k in counts))
                if g not in exclude and g not in seen
            ]
            order = rng.permutation(len(remaining))[: n - len(seen)]
            for i in order:
                seen.setdefault(remaining[int(i)], None)
        else:
            raise InfeasiblePopulationError(
                f"could not assemble {n} distinct genomes (got {len(seen)})"
            )
    return list(seen.keys())[:n]
