import json

import pytest

from hytsearch.evaluators import (
    AnalyticProxyEvaluator,
    EvaluationError,
    ZdtEvaluator,
)
from hytsearch.nsga2 import GaConfig
from hytsearch.pareto import dominates, non_dominated_sort
from hytsearch.search import (
    Archive,
    SearchAbortedError,
    SearchConfig,
    compute_reference_point,
    run_directory,
    run_hytnas,
    run_nsga2_direct,
    run_random,
    run_search,
    write_run_result,
)
from hytsearch.space import UniformGeneSpace, default_space

SPACE = default_space()
SMALL_GA = GaConfig(population_size=8, generations=4)


def small_cfg(**overrides):
    base = dict(
        strategy="hytnas",
        init_size=10,
        batch_size=5,
        eval_budget=30,
        surrogate_members=3,
        ga=SMALL_GA,
        seed=0,
    )
    base.update(overrides)
    return SearchConfig(**base)


class CountingProxy(AnalyticProxyEvaluator):
    """Fails with an evaluation error after a fixed number of calls."""

    def __init__(self, space, fail_after=None):
        super().__init__(space)
        self.calls = 0
        self.fail_after = fail_after

    def _evaluate(self, genome):
        if self.fail_after is not None and self.calls >= self.fail_after:
            raise EvaluationError("synthetic failure", genome=genome)
        self.calls += 1
        return super()._evaluate(genome)


class TestSearchConfig:
    def test_round_trip(self):
        cfg = small_cfg(ref_point=(0.5, 1e8))
        assert SearchConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            SearchConfig.from_dict({"stratgy": "hytnas"})

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"strategy": "simulated-annealing"},
            {"init_size": 0},
            {"init_size": 100, "eval_budget": 50},
            {"batch_size": 0},
            {"surrogate_members": 0},
            {"jobs": 0},
            {"strategy": "nsga2", "eval_budget": 150},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SearchConfig(**kwargs)


class TestReferencePoint:
    def test_positive_rule(self):
        ref = compute_reference_point([(0.5, 2.0), (0.2, 1.0)])
        assert ref == pytest.approx((0.55, 2.2))

    def test_single_point_strictly_dominated(self):
        for point in [(0.5, 2.0), (-1.0, 0.0), (0.0, 0.0)]:
            ref = compute_reference_point([point])
            assert all(r > p for r, p in zip(ref, point))

    def test_non_positive_uses_range(self):
        ref = compute_reference_point([(-4.0, -2.0), (-1.0, -8.0)])
        assert ref == pytest.approx((-1.0 + 0.3, -2.0 + 0.6))


class TestArchive:
    def test_rejects_duplicates_and_overflow(self):
        from hytsearch.evaluators import evaluate_record

        ev = AnalyticProxyEvaluator(SPACE)
        archive = Archive(capacity=1)
        rec = evaluate_record(ev, (0,) * 18)
        archive.add(rec)
        with pytest.raises(ValueError):
            archive.add(rec)
        with pytest.raises(ValueError):
            archive.add(evaluate_record(ev, (1,) + (0,) * 17))


class TestRunHytnas:
    def test_budget_equals_init_is_pure_sampling(self):
        cfg = small_cfg(init_size=12, eval_budget=12)
        res = run_hytnas(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert len(res.records) == 12
        assert len(res.hv_trace) == 1
        assert res.hv_trace[0][0] == 12

    def test_bit_reproducible(self):
        cfg = small_cfg(seed=7)
        ev = AnalyticProxyEvaluator(SPACE)
        a = run_hytnas(SPACE, ev, cfg)
        b = run_hytnas(SPACE, ev, cfg)
        assert [r.genome for r in a.records] == [r.genome for r in b.records]
        assert [r.minimized for r in a.records] == [r.minimized for r in b.records]
        assert a.hv_trace == b.hv_trace

    def test_archive_invariants(self):
        cfg = small_cfg()
        res = run_hytnas(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        genomes = [r.genome for r in res.records]
        assert len(genomes) == len(set(genomes)) == cfg.eval_budget
        # trace is non-decreasing and capped by the budget
        counts = [n for n, _ in res.hv_trace]
        values = [h for _, h in res.hv_trace]
        assert counts[-1] == cfg.eval_budget
        assert values == sorted(values)
        # final front is level 0 of the full archive, mutually non-dominated
        fronts = non_dominated_sort([r.minimized for r in res.records])
        assert [res.records[i].genome for i in fronts[0]] == [
            r.genome for r in res.front
        ]
        for a in res.front:
            assert not any(
                dominates(b.minimized, a.minimized) for b in res.front
            )

    def test_explicit_reference_point_is_used(self):
        ref = (0.6, 1.0e9)
        cfg = small_cfg(ref_point=ref)
        res = run_hytnas(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert res.reference_point == ref

    def test_tiny_space_falls_back_to_random_and_completes(self):
        space = UniformGeneSpace((2, 2, 2, 2))
        cfg = SearchConfig(
            strategy="hytnas",
            init_size=8,
            batch_size=4,
            eval_budget=16,
            surrogate_members=2,
            ga=GaConfig(population_size=4, generations=2),
            seed=1,
        )
        res = run_hytnas(space, ZdtEvaluator(space), cfg)
        assert len(res.records) == 16
        assert len({r.genome for r in res.records}) == 16

    def test_failure_preserves_partial_result(self):
        ev = CountingProxy(SPACE, fail_after=17)
        with pytest.raises(SearchAbortedError) as err:
            run_hytnas(SPACE, ev, small_cfg())
        partial = err.value.partial
        assert len(partial.records) == 17
        assert partial.strategy == "hytnas"
        assert err.value.cause.genome is not None

    def test_failure_during_initialization(self):
        ev = CountingProxy(SPACE, fail_after=4)
        with pytest.raises(SearchAbortedError) as err:
            run_hytnas(SPACE, ev, small_cfg())
        assert len(err.value.partial.records) == 4
        assert err.value.partial.hv_trace == ()


class TestRunRandom:
    def test_budget_one(self):
        cfg = SearchConfig(strategy="random", init_size=1, batch_size=1, eval_budget=1)
        res = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert len(res.records) == 1
        assert len(res.front) == 1

    def test_trace_has_batch_boundaries(self):
        cfg = SearchConfig(
            strategy="random", init_size=10, batch_size=5, eval_budget=23, seed=2
        )
        res = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert [n for n, _ in res.hv_trace] == [10, 15, 20, 23]

    def test_all_distinct(self):
        cfg = SearchConfig(strategy="random", init_size=10, batch_size=10, eval_budget=60)
        res = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        genomes = {r.genome for r in res.records}
        assert len(genomes) == 60

    def test_reproducible(self):
        cfg = SearchConfig(strategy="random", init_size=5, batch_size=5, eval_budget=15, seed=3)
        a = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        b = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert [r.genome for r in a.records] == [r.genome for r in b.records]

    def test_parallel_evaluation_changes_nothing(self):
        serial = SearchConfig(
            strategy="random", init_size=5, batch_size=5, eval_budget=20, seed=4, jobs=1
        )
        threaded = SearchConfig(
            strategy="random", init_size=5, batch_size=5, eval_budget=20, seed=4, jobs=4
        )
        a = run_random(SPACE, AnalyticProxyEvaluator(SPACE), serial)
        b = run_random(SPACE, AnalyticProxyEvaluator(SPACE), threaded)
        assert [r.genome for r in a.records] == [r.genome for r in b.records]
        assert [r.minimized for r in a.records] == [r.minimized for r in b.records]
        assert a.hv_trace == b.hv_trace


class TestRunNsga2Direct:
    def test_generation_arithmetic(self):
        cfg = SearchConfig(
            strategy="nsga2",
            eval_budget=40,
            init_size=8,
            ga=GaConfig(population_size=8, generations=99),
            seed=0,
        )
        res = run_nsga2_direct(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        # floor(40/8) - 1 = 4 generations after the initial population
        assert len(res.hv_trace) == 5
        assert len(res.records) <= 40

    def test_front_is_level0_of_full_archive(self):
        cfg = SearchConfig(
            strategy="nsga2",
            eval_budget=32,
            init_size=8,
            ga=GaConfig(population_size=8, generations=9),
            seed=1,
        )
        res = run_nsga2_direct(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        level0 = non_dominated_sort([r.minimized for r in res.records])[0]
        assert [r.genome for r in res.front] == [res.records[i].genome for i in level0]

    def test_no_genome_evaluated_twice(self):
        cfg = SearchConfig(
            strategy="nsga2",
            eval_budget=32,
            init_size=8,
            ga=GaConfig(population_size=8, generations=9),
            seed=2,
        )
        ev = CountingProxy(SPACE)
        res = run_nsga2_direct(SPACE, ev, cfg)
        assert ev.calls == len(res.records)
        assert len({r.genome for r in res.records}) == len(res.records)


class TestDispatchAndPersistence:
    def test_dispatch(self):
        cfg = SearchConfig(strategy="random", init_size=4, batch_size=4, eval_budget=8)
        res = run_search(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        assert res.strategy == "random"

    def test_write_run_result(self, tmp_path):
        cfg = small_cfg(init_size=6, eval_budget=12, batch_size=6)
        res = run_hytnas(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        run_dir = run_directory(tmp_path, res.strategy, cfg.seed)
        paths = write_run_result(res, run_dir)
        assert paths["archive"].exists() and paths["trace"].exists()

        archive_lines = paths["archive"].read_text().strip().splitlines()
        assert len(archive_lines) == 1 + len(res.records)
        assert archive_lines[0].startswith("g0,") and "error,macs,eval_index" in archive_lines[0]

        front = json.loads(paths["front"].read_text())
        assert front["strategy"] == "hytnas"
        assert front["reference_point"] == list(res.reference_point)
        assert len(front["front"]) == len(res.front)
        stored = [tuple(e["minimized"]) for e in front["front"]]
        assert stored == [r.minimized for r in res.front]

    def test_trace_csv_format(self, tmp_path):
        cfg = SearchConfig(strategy="random", init_size=4, batch_size=4, eval_budget=8)
        res = run_random(SPACE, AnalyticProxyEvaluator(SPACE), cfg)
        paths = write_run_result(res, tmp_path / "r")
        lines = paths["trace"].read_text().strip().splitlines()
        assert lines[0] == "evals,hypervolume"
        assert len(lines) == 1 + len(res.hv_trace)
