"""Elitist multi-objective GA over discrete genomes.

Standard NSGA-II loop: binary tournaments on (dominance rank, crowding
distance), uniform crossover, per-gene reset mutation, and (mu + lambda)
environmental selection by rank then crowding. Used both to solve the
cheap surrogate problem inside the main search loop and as a standalone
baseline on true objectives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .pareto import crowding_distance, non_dominated_sort
from .sampling import uniform_genome
from .space import GeneSpace, Genome, GenomeValidationError, validate_genome


@runtime_checkable
class MultiObjectiveProblem(Protocol):
    """Anything with ``evaluate(genome) -> objective vector`` (minimized).

    An optional ``evaluate_batch(genomes) -> (n, m) array`` is used when
    present; it must agree with pointwise evaluation.
    """

    def evaluate(self, genome: Genome) -> np.ndarray: ...


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 20
    crossover_prob: float = 0.9
    mutation_prob_per_gene: float | None = None  # None: 1 / genome length

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population_size must be even and >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob_per_gene is not None and not (
            0.0 <= self.mutation_prob_per_gene <= 1.0
        ):
            raise ValueError("mutation_prob_per_gene must be in [0, 1]")


@dataclass(frozen=True)
class SolverPoint:
    """One member of the solver output, tagged with its dominance level."""

    genome: Genome
    objectives: tuple[float, ...]
    level: int


def tournament_select(
    ranks: Sequence[int], crowding: Sequence[float], rng: np.random.Generator
) -> int:
    """Binary tournament: lower rank wins, then larger crowding, then the
    first-drawn candidate."""
    n = len(ranks)
    i = int(rng.integers(n))
    j = int(rng.integers(n))
    if ranks[j] < ranks[i]:
        return j
    if ranks[j] == ranks[i] and crowding[j] > crowding[i]:
        return j
    return i


def uniform_crossover(
    a: Genome, b: Genome, prob: float, rng: np.random.Generator
) -> tuple[Genome, Genome]:
    """With probability ``prob``, swap each gene between the children
    independently with probability 1/2; otherwise return the parents."""
    if len(a) != len(b):
        raise GenomeValidationError(f"parent lengths differ: {len(a)} vs {len(b)}")
    if rng.random() >= prob:
        return a, b
    swap = rng.random(len(a)) < 0.5
    c1 = tuple(bb if s else aa for aa, bb, s in zip(a, b, swap))
    c2 = tuple(aa if s else bb for aa, bb, s in zip(a, b, swap))
    return c1, c2


def reset_mutation(
    space: GeneSpace, g: Genome, prob: float, rng: np.random.Generator
) -> Genome:
    """Each gene is independently redrawn uniformly over its options with
    probability ``prob``."""
    counts = space.option_counts
    draws = rng.random(len(counts))
    return tuple(
        int(rng.integers(k)) if draws[i] < prob else gi
        for i, (gi, k) in enumerate(zip(g, counts))
    )


def _evaluate_all(problem, genomes: list[Genome]) -> np.ndarray:
    batch = getattr(problem, "evaluate_batch", None)
    if batch is not None:
        return np.asarray(batch(genomes), dtype=np.float64)
    evaluate = getattr(problem, "evaluate", problem)
    return np.asarray([evaluate(g) for g in genomes], dtype=np.float64)


def _ranks_and_crowding(objs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    levels = non_dominated_sort(objs)
    ranks = np.empty(objs.shape[0], dtype=np.int64)
    crowd = np.empty(objs.shape[0], dtype=np.float64)
    for lvl, members in enumerate(levels):
        ranks[members] = lvl
        dists = crowding_distance(objs[members])
        for idx, dist in zip(members, dists):
            crowd[idx] = dist
    return ranks, crowd


def _environmental_select(objs: np.ndarray, size: int) -> list[int]:
    """Indices of the ``size`` survivors: whole fronts in order, the last
    one truncated by descending crowding (ties keep the lower index)."""
    levels = non_dominated_sort(objs)
    chosen: list[int] = []
    for members in levels:
        if len(chosen) + len(members) <= size:
            chosen.extend(members)
            if len(chosen) == size:
                break
            continue
        dists = crowding_distance(objs[members])
        order = sorted(range(len(members)), key=lambda k: (-dists[k], members[k]))
        chosen.extend(members[k] for k in order[: size - len(chosen)])
        break
    return chosen


def evolve(
    problem,
    space: GeneSpace,
    cfg: GaConfig,
    rng: np.random.Generator,
    seed_population: Sequence[Genome] | None = None,
    on_generation: Callable[[int, list[Genome], np.ndarray], None] | None = None,
) -> list[SolverPoint]:
    """Run the generational loop and return the final population's first two
    dominance levels, each point tagged with its level.

    ``seed_population`` primes the initial population (padded with uniform
    genomes if short, truncated if long). ``on_generation`` is called with
    (generation index, genomes, objectives) after every evaluation round,
    generation 0 being the initial population.
    """
    mut_prob = (
        cfg.mutation_prob_per_gene
        if cfg.mutation_prob_per_gene is not None
        else 1.0 / max(1, space.genome_length)
    )

    pop: list[Genome] = []
    if seed_population:
        for g in list(seed_population)[: cfg.population_size]:
            pop.append(validate_genome(space, g))
    while len(pop) < cfg.population_size:
        pop.append(uniform_genome(space, rng))

    objs = _evaluate_all(problem, pop)
    if on_generation:
        on_generation(0, pop, objs)

    for gen in range(1, cfg.generations + 1):
        ranks, crowd = _ranks_and_crowding(objs)
        children: list[Genome] = []
        while len(children) < cfg.population_size:
            pi = tournament_select(ranks, crowd, rng)
            pj = tournament_select(ranks, crowd, rng)
            c1, c2 = uniform_crossover(pop[pi], pop[pj], cfg.crossover_prob, rng)
            children.append(reset_mutation(space, c1, mut_prob, rng))
            if len(children) < cfg.population_size:
                children.append(reset_mutation(space, c2, mut_prob, rng))
        child_objs = _evaluate_all(problem, children)
        if on_generation:
            on_generation(gen, children, child_objs)

        combined = pop + children
        combined_objs = np.vstack([objs, child_objs])
        survivors = _environmental_select(combined_objs, cfg.population_size)
        pop = [combined[i] for i in survivors]
        objs = combined_objs[survivors]

    levels = non_dominated_sort(objs)
    out: list[SolverPoint] = []
    for lvl in range(min(2, len(levels))):
        for i in levels[lvl]:
            out.append(SolverPoint(pop[i], tuple(float(v) for v in objs[i]), lvl))
    return out
