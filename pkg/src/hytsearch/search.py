"""Search strategies and run bookkeeping.

Three strategies share one result shape:

* ``hytnas``: the surrogate-assisted loop. A Latin-hypercube initial
  population seeds the archive; each iteration refits per-objective rank
  ensembles on the whole archive, minimizes the confidence-bound scores
  with NSGA-II, keeps the first two dominance levels of the solver output,
  and picks the evaluation batch by greedy hypervolume improvement against
  the archive front (both sides in rank coordinates).
* ``random``: distinct uniform genomes, same bookkeeping.
* ``nsga2``: the GA on true objectives, archiving every new evaluation.

Every strategy is bit-reproducible for a fixed seed: all randomness flows
from per-phase child seeds (derive_seed(seed, stream)) with stream ids
0 = initial/uniform sampling, 1 = duplicate fallback, 2 = GA loop,
10000+t = iteration-t ensembles and 20000+t = iteration-t solver.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .acquisition import AcquisitionConfig, beta_at, ucb_score
from .evaluators import (
    EvaluationError,
    EvaluationRecord,
    Evaluator,
    evaluate_record,
    evaluate_records,
)
from .nsga2 import GaConfig, evolve
from .pareto import greedy_hvi_select, hypervolume_2d, non_dominated_sort
from .sampling import derive_seed, lhs_genomes, make_rng, uniform_genomes_distinct
from .space import GeneSpace, Genome, cardinality
from .surrogate import RankEnsemble, fit_objective_ensembles, rank_normalize

STRATEGIES = ("hytnas", "random", "nsga2")

# Reference point for batch selection, in per-objective rank coordinates
# (archive ranks and predicted ranks both live in [0, 1]).
SELECTION_RANK_REF = (1.1, 1.1)

RESULT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SearchConfig:
    """Resolved settings for one run; validated on construction."""

    strategy: str = "hytnas"
    init_size: int = 50
    batch_size: int = 10
    eval_budget: int = 500
    surrogate_members: int = 5
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    seed: int = 0
    ref_point: tuple[float, ...] | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.init_size < 1 or self.batch_size < 1 or self.eval_budget < 1:
            raise ValueError("init_size, batch_size and eval_budget must be >= 1")
        if self.init_size > self.eval_budget:
            raise ValueError("init_size cannot exceed eval_budget")
        if self.surrogate_members < 1:
            raise ValueError("surrogate_members must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.strategy == "nsga2" and self.eval_budget < 2 * self.ga.population_size:
            raise ValueError(
                "nsga2 strategy needs eval_budget >= 2 * ga.population_size "
                "(one initial population plus at least one generation)"
            )

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "init_size": self.init_size,
            "batch_size": self.batch_size,
            "eval_budget": self.eval_budget,
            "surrogate_members": self.surrogate_members,
            "acquisition": {
                "beta0": self.acquisition.beta0,
                "schedule": self.acquisition.schedule,
            },
            "ga": {
                "population_size": self.ga.population_size,
                "generations": self.ga.generations,
                "crossover_prob": self.ga.crossover_prob,
                "mutation_prob_per_gene": self.ga.mutation_prob_per_gene,
            },
            "seed": self.seed,
            "ref_point": list(self.ref_point) if self.ref_point is not None else None,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown search config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "acquisition" in kwargs and isinstance(kwargs["acquisition"], dict):
            kwargs["acquisition"] = AcquisitionConfig(**kwargs["acquisition"])
        if "ga" in kwargs and isinstance(kwargs["ga"], dict):
            kwargs["ga"] = GaConfig(**kwargs["ga"])
        if kwargs.get("ref_point") is not None:
            kwargs["ref_point"] = tuple(float(v) for v in kwargs["ref_point"])
        return cls(**kwargs)


class Archive:
    """Evaluation records in insertion order, keyed by genome."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.records: list[EvaluationRecord] = []
        self._keys: set[Genome] = set()

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, genome: Genome) -> bool:
        return tuple(genome) in self._keys

    @property
    def keys(self) -> set[Genome]:
        return self._keys

    def add(self, record: EvaluationRecord) -> None:
        if record.genome in self._keys:
            raise ValueError(f"genome {record.genome} already archived")
        if len(self.records) >= self.capacity:
            raise ValueError("archive is at its evaluation budget")
        self.records.append(record)
        self._keys.add(record.genome)

    def minimized_matrix(self) -> np.ndarray:
        return np.array([r.minimized for r in self.records], dtype=np.float64)

    def front(self) -> list[EvaluationRecord]:
        """Level-0 records in insertion order."""
        if not self.records:
            return []
        level0 = non_dominated_sort(self.minimized_matrix())[0]
        return [self.records[i] for i in level0]


@dataclass(frozen=True)
class RunResult:
    """Everything one run produced, sufficient to reproduce its reports."""

    strategy: str
    records: tuple[EvaluationRecord, ...]
    hv_trace: tuple[tuple[int, float], ...]
    front: tuple[EvaluationRecord, ...]
    reference_point: tuple[float, ...] | None
    objective_names: tuple[str, ...]
    senses: tuple[str, ...]
    config: SearchConfig
    wall_time: float

    @property
    def final_hypervolume(self) -> float:
        return self.hv_trace[-1][1] if self.hv_trace else 0.0


class SearchAbortedError(RuntimeError):
    """An evaluator failure stopped a run; carries the partial result."""

    def __init__(self, partial: RunResult, cause: EvaluationError):
        super().__init__(f"search aborted: {cause}")
        self.partial = partial
        self.cause = cause


def compute_reference_point(minimized: Sequence[Sequence[float]]) -> tuple[float, ...]:
    """Worst observed value per objective, pushed 10% further.

    Positive worsts scale by 1.1; otherwise 10% of the observed range is
    added. A degenerate (zero-range, non-positive) component falls back to
    worst + 1.0 so the point stays strictly dominated by every record.
    """
    arr = np.asarray(minimized, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("need at least one evaluated point")
    worst = arr.max(axis=0)
    span = worst - arr.min(axis=0)
    ref = []
    for w, s in zip(worst, span):
        r = 1.1 * w if w > 0 else w + 0.1 * s
        if r <= w:
            r = w + 1.0
        ref.append(float(r))
    return tuple(ref)


def unit_features(space: GeneSpace, genomes: Sequence[Genome]) -> np.ndarray:
    """Unit-cube feature matrix for valid genomes (vectorized form of the
    per-genome unit-vector map)."""
    counts = np.asarray(space.option_counts, dtype=np.float64)
    scales = np.where(counts > 1, 1.0 / np.maximum(counts - 1, 1), 0.0)
    return np.asarray(genomes, dtype=np.float64) * scales


class SurrogateProblem:
    """Minimize per-objective confidence-bound scores of the ensembles.

    Scores are memoized per genome: solver populations revisit the same
    genomes across generations and the ensembles are fixed for the problem's
    lifetime, so repeats are free.
    """

    def __init__(self, space: GeneSpace, ensembles: Sequence[RankEnsemble], beta: float):
        self.space = space
        self.ensembles = list(ensembles)
        self.beta = beta
        self._cache: dict[Genome, np.ndarray] = {}

    def _features(self, genomes: Sequence[Genome]) -> np.ndarray:
        return unit_features(self.space, genomes)

    def _predict_rows(self, genomes: list[Genome]) -> np.ndarray:
        feats = self._features(genomes)
        cols = []
        for ens in self.ensembles:
            mean, std = ens.predict(feats)
            cols.append(np.column_stack([mean, std]))
        return np.stack(cols, axis=1)  # (n, objectives, 2)

    def evaluate_batch(self, genomes: Sequence[Genome]) -> np.ndarray:
        keys = [tuple(int(v) for v in g) for g in genomes]
        missing = list(dict.fromkeys(k for k in keys if k not in self._cache))
        if missing:
            rows = self._predict_rows(missing)
            for k, row in zip(missing, rows):
                self._cache[k] = row
        out = np.empty((len(keys), len(self.ensembles)), dtype=np.float64)
        for i, k in enumerate(keys):
            stats = self._cache[k]
            out[i] = ucb_score(stats[:, 0], stats[:, 1], self.beta)
        return out

    def evaluate(self, genome: Genome) -> np.ndarray:
        return self.evaluate_batch([genome])[0]

    def predicted_means(self, genomes: Sequence[Genome]) -> np.ndarray:
        self.evaluate_batch(genomes)  # fill the cache
        return np.array(
            [self._cache[tuple(int(v) for v in g)][:, 0] for g in genomes]
        )


def _hv_of(archive: Archive, ref: tuple[float, ...]) -> float:
    return hypervolume_2d(archive.minimized_matrix(), ref)


def _evaluate_into(
    archive: Archive, evaluator: Evaluator, genomes: Sequence[Genome], jobs: int
) -> None:
    """Evaluate a batch into the archive in proposal order.

    Sequentially, records land in the archive one by one, so everything
    evaluated before a failure is retained. With ``jobs`` > 1 the batch in
    flight is lost on failure but all prior batches survive.
    """
    hint = evaluator.max_parallelism
    effective = jobs if hint is None else min(jobs, hint)
    if effective <= 1 or len(genomes) <= 1:
        for g in genomes:
            archive.add(evaluate_record(evaluator, g))
    else:
        for rec in evaluate_records(evaluator, genomes, jobs=jobs):
            archive.add(rec)


def _build_result(
    strategy: str,
    archive: Archive,
    trace: list[tuple[int, float]],
    ref: tuple[float, ...] | None,
    evaluator: Evaluator,
    cfg: SearchConfig,
    start_time: float,
) -> RunResult:
    return RunResult(
        strategy=strategy,
        records=tuple(archive.records),
        hv_trace=tuple(trace),
        front=tuple(archive.front()),
        reference_point=ref,
        objective_names=evaluator.objective_names,
        senses=evaluator.senses,
        config=cfg,
        wall_time=time.perf_counter() - start_time,
    )


def _resolve_ref(
    cfg: SearchConfig, archive: Archive
) -> tuple[float, ...]:
    if cfg.ref_point is not None:
        return tuple(float(v) for v in cfg.ref_point)
    return compute_reference_point([r.minimized for r in archive.records])


def run_hytnas(space: GeneSpace, evaluator: Evaluator, cfg: SearchConfig) -> RunResult:
    """The surrogate-assisted loop; see the module docstring for the steps."""
    start = time.perf_counter()
    archive = Archive(cfg.eval_budget)
    trace: list[tuple[int, float]] = []
    ref: tuple[float, ...] | None = None
    try:
        init_rng = make_rng(derive_seed(cfg.seed, 0))
        initial = lhs_genomes(space, cfg.init_size, init_rng)
        _evaluate_into(archive, evaluator, initial, cfg.jobs)
        ref = _resolve_ref(cfg, archive)
        trace.append((len(archive), _hv_of(archive, ref)))

        fallback_rng = make_rng(derive_seed(cfg.seed, 1))
        total_iters = max(1, math.ceil((cfg.eval_budget - cfg.init_size) / cfg.batch_size))
        t = 0
        while len(archive) < cfg.eval_budget:
            X = unit_features(space, [r.genome for r in archive.records])
            Y = archive.minimized_matrix()
            ensembles = fit_objective_ensembles(
                X, Y, n_members=cfg.surrogate_members, seed=derive_seed(cfg.seed, 10_000 + t)
            )
            beta = beta_at(cfg.acquisition, t, total_iters)
            problem = SurrogateProblem(space, ensembles, beta)

            solver_rng = make_rng(derive_seed(cfg.seed, 20_000 + t))
            points = evolve(problem, space, cfg.ga, solver_rng)

            seen: set[Genome] = set()
            candidates: list[Genome] = []
            for p in points:
                if p.genome in seen or p.genome in archive:
                    continue
                seen.add(p.genome)
                candidates.append(p.genome)

            q_eff = min(cfg.batch_size, cfg.eval_budget - len(archive))
            if candidates:
                means = problem.predicted_means(candidates)
                rank_y = np.column_stack(
                    [rank_normalize(Y[:, j]) for j in range(Y.shape[1])]
                )
                front_idx = non_dominated_sort(Y)[0]
                chosen = greedy_hvi_select(
                    means, rank_y[front_idx], SELECTION_RANK_REF, q_eff
                )
                batch = [candidates[i] for i in chosen]
            else:
                batch = uniform_genomes_distinct(
                    space, q_eff, fallback_rng, exclude=archive.keys
                )

            _evaluate_into(archive, evaluator, batch, cfg.jobs)
            trace.append((len(archive), _hv_of(archive, ref)))
            t += 1
    except EvaluationError as exc:
        if ref is None and len(archive) > 0:
            ref = _resolve_ref(cfg, archive)
        partial = _build_result("hytnas", archive, trace, ref, evaluator, cfg, start)
        raise SearchAbortedError(partial, exc) from exc

    return _build_result("hytnas", archive, trace, ref, evaluator, cfg, start)


def run_random(space: GeneSpace, evaluator: Evaluator, cfg: SearchConfig) -> RunResult:
    """Distinct uniform genomes with the same bookkeeping as the main loop."""
    start = time.perf_counter()
    archive = Archive(cfg.eval_budget)
    trace: list[tuple[int, float]] = []
    ref: tuple[float, ...] | None = None
    try:
        rng = make_rng(derive_seed(cfg.seed, 0))
        genomes = uniform_genomes_distinct(space, cfg.eval_budget, rng)
        boundaries = [cfg.init_size]
        while boundaries[-1] < cfg.eval_budget:
            boundaries.append(min(boundaries[-1] + cfg.batch_size, cfg.eval_budget))
        prev = 0
        for bound in boundaries:
            _evaluate_into(archive, evaluator, genomes[prev:bound], cfg.jobs)
            prev = bound
            if ref is None:
                ref = _resolve_ref(cfg, archive)
            trace.append((len(archive), _hv_of(archive, ref)))
    except EvaluationError as exc:
        if ref is None and len(archive) > 0:
            ref = _resolve_ref(cfg, archive)
        partial = _build_result("random", archive, trace, ref, evaluator, cfg, start)
        raise SearchAbortedError(partial, exc) from exc

    return _build_result("random", archive, trace, ref, evaluator, cfg, start)


class _ArchivingProblem:
    """Wraps an evaluator for the direct GA: archives each new genome once
    and replays archived objectives for repeats."""

    def __init__(self, evaluator: Evaluator, archive: Archive):
        self.evaluator = evaluator
        self.archive = archive
        self._cache: dict[Genome, np.ndarray] = {}

    def evaluate(self, genome: Genome) -> np.ndarray:
        key = tuple(int(g) for g in genome)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        rec = evaluate_record(self.evaluator, key)
        self.archive.add(rec)
        out = np.asarray(rec.minimized, dtype=np.float64)
        self._cache[key] = out
        return out


def run_nsga2_direct(space: GeneSpace, evaluator: Evaluator, cfg: SearchConfig) -> RunResult:
    """The GA on true objectives: floor(budget / population) - 1 generations
    after the initial population, tracing hypervolume per generation."""
    start = time.perf_counter()
    archive = Archive(cfg.eval_budget)
    trace: list[tuple[int, float]] = []
    generations = cfg.eval_budget // cfg.ga.population_size - 1
    ga = dataclasses.replace(cfg.ga, generations=generations)
    problem = _ArchivingProblem(evaluator, archive)
    state = {"ref": cfg.ref_point}

    def on_generation(gen: int, genomes, objs) -> None:
        if state["ref"] is None:
            state["ref"] = compute_reference_point([r.minimized for r in archive.records])
        trace.append((len(archive), _hv_of(archive, tuple(state["ref"]))))

    try:
        rng = make_rng(derive_seed(cfg.seed, 2))
        evolve(problem, space, ga, rng, on_generation=on_generation)
    except EvaluationError as exc:
        ref = tuple(state["ref"]) if state["ref"] is not None else None
        if ref is None and len(archive) > 0:
            ref = _resolve_ref(cfg, archive)
        partial = _build_result("nsga2", archive, trace, ref, evaluator, cfg, start)
        raise SearchAbortedError(partial, exc) from exc

    ref = tuple(float(v) for v in state["ref"])
    return _build_result("nsga2", archive, trace, ref, evaluator, cfg, start)


def run_search(space: GeneSpace, evaluator: Evaluator, cfg: SearchConfig) -> RunResult:
    """Dispatch on ``cfg.strategy``."""
    if cardinality(space) < cfg.init_size and cfg.strategy == "hytnas":
        raise ValueError("space smaller than the initial population")
    runner = {"hytnas": run_hytnas, "random": run_random, "nsga2": run_nsga2_direct}[
        cfg.strategy
    ]
    return runner(space, evaluator, cfg)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def run_directory(out_root: str | Path, strategy: str, seed: int) -> Path:
    return Path(out_root) / f"{strategy}-seed{seed}"


def write_archive_csv(result: RunResult, path: Path) -> None:
    lines = []
    length = len(result.records[0].genome) if result.records else 0
    gene_cols = [f"g{i}" for i in range(length)]
    lines.append(",".join(gene_cols + list(result.objective_names) + ["eval_index"]))
    for idx, rec in enumerate(result.records):
        cells = [str(g) for g in rec.genome]
        cells += [repr(float(v)) for v in rec.raw]
        cells.append(str(idx))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trace_csv(result: RunResult, path: Path) -> None:
    lines = ["evals,hypervolume"]
    for evals, hv in result.hv_trace:
        lines.append(f"{evals},{repr(float(hv))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def front_to_dict(result: RunResult) -> dict:
    eval_index = {rec.genome: i for i, rec in enumerate(result.records)}
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "strategy": result.strategy,
        "seed": result.config.seed,
        "objective_names": list(result.objective_names),
        "senses": list(result.senses),
        "reference_point": list(result.reference_point)
        if result.reference_point is not None
        else None,
        "final_hypervolume": result.final_hypervolume,
        "config": result.config.to_dict(),
        "front": [
            {
                "genes": list(rec.genome),
                "eval_index": eval_index[rec.genome],
                "objectives": {
                    name: value for name, value in zip(result.objective_names, rec.raw)
                },
                "minimized": list(rec.minimized),
            }
            for rec in result.front
        ],
    }


def write_run_result(result: RunResult, run_dir: str | Path) -> dict[str, Path]:
    """Write archive.csv, hv_trace.csv and front.json into ``run_dir``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "archive": run_dir / "archive.csv",
        "trace": run_dir / "hv_trace.csv",
        "front": run_dir / "front.json",
    }
    write_archive_csv(result, paths["archive"])
    write_trace_csv(result, paths["trace"])
    paths["front"].write_text(
        json.dumps(front_to_dict(result), indent=2) + "\n", encoding="utf-8"
    )
    return paths
