import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hytsearch.pareto import (
    UnsupportedDimensionError,
    crowding_distance,
    dominates,
    greedy_hvi_select,
    hvi,
    hypervolume_2d,
    non_dominated_sort,
)

from .oracles import dominance_levels_oracle, hv_inclusion_exclusion, hv_union_grid

finite_floats = st.floats(
    min_value=-100, max_value=100, allow_nan=False, allow_infinity=False
)
point2 = st.tuples(finite_floats, finite_floats)


class TestDominates:
    def test_strict(self):
        assert dominates((1, 1), (2, 2))

    def test_equal_points_do_not_dominate(self):
        assert not dominates((1, 1), (1, 1))

    def test_incomparable(self):
        assert not dominates((1, 3), (3, 1))
        assert not dominates((3, 1), (1, 3))

    def test_weak_improvement_counts(self):
        assert dominates((1, 2), (1, 3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            dominates((1, 2), (1, 2, 3))

    @given(point2, point2)
    @settings(max_examples=100, deadline=None)
    def test_antisymmetry(self, a, b):
        assert not (dominates(a, b) and dominates(b, a))


class TestNonDominatedSort:
    def test_identical_points_single_level(self):
        levels = non_dominated_sort([(2.0, 2.0)] * 5)
        assert levels == [[0, 1, 2, 3, 4]]

    def test_chain(self):
        levels = non_dominated_sort([(1, 1), (2, 2), (3, 3)])
        assert levels == [[0], [1], [2]]

    def test_order_preserved_within_level(self):
        levels = non_dominated_sort([(1, 3), (3, 1), (2, 2)])
        assert levels == [[0, 1, 2]]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            non_dominated_sort([])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce_oracle_200_points(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((200, 2))
        # duplicate some rows to exercise tie handling
        pts[::17] = pts[1::17]
        assert non_dominated_sort(pts) == dominance_levels_oracle(pts)

    def test_three_objectives(self):
        pts = [(1, 1, 1), (2, 2, 2), (1, 2, 3), (3, 2, 1)]
        assert non_dominated_sort(pts) == dominance_levels_oracle(pts)

    @given(st.lists(point2, min_size=1, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_level_zero_is_maximal_nondominated_set(self, pts):
        levels = non_dominated_sort(pts)
        assert levels[0] == dominance_levels_oracle(pts)[0]


class TestCrowdingDistance:
    def test_two_point_front_all_infinite(self):
        assert crowding_distance([(1, 2), (2, 1)]) == [math.inf, math.inf]

    def test_single_point_infinite(self):
        assert crowding_distance([(1, 1)]) == [math.inf]

    def test_hand_computed_middle(self):
        dists = crowding_distance([(1, 3), (2, 2), (3, 1)])
        assert dists[0] == math.inf and dists[2] == math.inf
        assert dists[1] == pytest.approx(2.0)

    def test_zero_range_objective_contributes_nothing(self):
        dists = crowding_distance([(1, 5), (2, 5), (3, 5)])
        assert dists[1] == pytest.approx(1.0)


class TestHypervolume2d:
    def test_single_box(self):
        assert hypervolume_2d([(1, 1)], (2, 2)) == pytest.approx(1.0)

    def test_staircase(self):
        assert hypervolume_2d([(1, 3), (2, 2), (3, 1)], (4, 4)) == pytest.approx(6.0)

    def test_empty(self):
        assert hypervolume_2d([], (1, 1)) == 0.0

    def test_points_outside_reference_contribute_zero(self):
        assert hypervolume_2d([(3, 3), (1, 1)], (2, 2)) == pytest.approx(1.0)

    def test_duplicates_and_dominated_change_nothing(self):
        base = hypervolume_2d([(1, 1)], (2, 2))
        assert hypervolume_2d([(1, 1), (1, 1), (1.5, 1.5)], (2, 2)) == base

    def test_wrong_dimension(self):
        with pytest.raises(UnsupportedDimensionError):
            hypervolume_2d([(1, 1, 1)], (2, 2, 2))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracles(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((int(rng.integers(1, 9)), 2)) * 0.9
        ref = (1.0, 1.0)
        mine = hypervolume_2d(pts, ref)
        assert mine == pytest.approx(hv_union_grid(pts, ref), rel=1e-9)
        assert mine == pytest.approx(hv_inclusion_exclusion(pts, ref), abs=1e-9)

    @given(st.lists(point2, min_size=0, max_size=20), point2)
    @settings(max_examples=80, deadline=None)
    def test_permutation_invariance(self, pts, ref):
        hv = hypervolume_2d(pts, ref)
        assert hypervolume_2d(list(reversed(pts)), ref) == hv

    @given(st.lists(point2, min_size=1, max_size=20), point2, point2)
    @settings(max_examples=80, deadline=None)
    def test_adding_points_never_decreases(self, pts, extra, ref):
        assert hypervolume_2d(pts + [extra], ref) >= hypervolume_2d(pts, ref)

    @given(
        st.lists(point2, min_size=1, max_size=12),
        st.floats(min_value=0.01, max_value=50, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_covariance(self, pts, s):
        ref = (150.0, 150.0)
        hv = hypervolume_2d(pts, ref)
        scaled = [(s * a, s * b) for a, b in pts]
        hv_s = hypervolume_2d(scaled, (s * ref[0], s * ref[1]))
        assert hv_s == pytest.approx(s * s * hv, rel=1e-9, abs=1e-12)


class TestHvi:
    def test_dominated_candidate_zero(self):
        assert hvi((1.5, 1.5), [(1, 1)], (2, 2)) == 0.0

    def test_hand_computed_gain(self):
        assert hvi((0.5, 0.5), [(1, 1)], (2, 2)) == pytest.approx(1.25)

    def test_equal_to_front_point_zero(self):
        assert hvi((1, 1), [(1, 1)], (2, 2)) == 0.0

    def test_candidate_outside_reference_zero(self):
        assert hvi((5, 5), [(1, 1)], (2, 2)) == 0.0

    def test_empty_front(self):
        assert hvi((1, 1), [], (2, 2)) == pytest.approx(1.0)

    @given(point2, st.lists(point2, min_size=0, max_size=15), point2)
    @settings(max_examples=100, deadline=None)
    def test_nonnegative(self, cand, front, ref):
        assert hvi(cand, front, ref) >= 0.0

    def test_front_point_against_own_front_is_zero(self):
        front = [(0.2, 0.8), (0.5, 0.5), (0.8, 0.2)]
        for p in front:
            assert hvi(p, front, (1.0, 1.0)) == 0.0


class TestGreedyHviSelect:
    def test_single_candidate(self):
        assert greedy_hvi_select([(0.5, 0.5)], [], (1, 1), 1) == [0]

    def test_q_at_least_all_candidates(self):
        cands = [(0.2, 0.8), (0.9, 0.95), (0.8, 0.2)]
        picked = greedy_hvi_select(cands, [(0.5, 0.5)], (1, 1), 5)
        assert sorted(picked) == [0, 1, 2]
        # HVI-positive candidates come first; the near-reference one last
        assert picked[-1] == 1

    def test_matches_exhaustive_subset_on_constructed_case(self):
        # disjoint, equal-ish boxes so greedy and exhaustive agree
        cands = [(0.1, 0.9), (0.45, 0.45), (0.9, 0.1), (0.95, 0.95)]
        front = []
        ref = (1.0, 1.0)
        picked = greedy_hvi_select(cands, front, ref, 2)

        def joint_hv(subset):
            return hypervolume_2d([cands[i] for i in subset], ref)

        best = max(itertools.combinations(range(len(cands)), 2), key=joint_hv)
        assert joint_hv(tuple(sorted(picked))) == pytest.approx(joint_hv(best))

    def test_ties_break_to_lowest_index(self):
        cands = [(0.5, 0.5), (0.5, 0.5)]
        assert greedy_hvi_select(cands, [], (1, 1), 1) == [0]

    def test_zero_gain_fills_ascending(self):
        cands = [(2, 2), (3, 3), (0.5, 0.5)]
        picked = greedy_hvi_select(cands, [], (1, 1), 2)
        assert picked == [2, 0]

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            greedy_hvi_select([], [], (1, 1), 1)
