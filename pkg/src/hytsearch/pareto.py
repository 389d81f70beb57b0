"""Multi-objective primitives on minimization-sense objective vectors.

Dominance, fast non-dominated sorting, crowding distance, exact
bi-objective hypervolume via a sort-and-sweep, and greedy batch selection
by hypervolume improvement. Everything here is a pure function.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

ArrayLike = Sequence[Sequence[float]]


class UnsupportedDimensionError(ValueError):
    """Raised when an operation only defined for two objectives gets more."""


def _as_points(points: ArrayLike) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 2)
    return arr


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff a is no worse than b everywhere and strictly better somewhere."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise ValueError(f"objective dimensions differ: {av.shape} vs {bv.shape}")
    return bool(np.all(av <= bv) and np.any(av < bv))


def non_dominated_sort(points: ArrayLike) -> list[list[int]]:
    """Partition point indices into dominance levels (level 0 first).

    Indices keep their original order within each level. Equivalent to the
    classic dominance-count peeling; pairwise comparisons are vectorized.
    """
    arr = _as_points(points)
    n = arr.shape[0]
    if n == 0:
        raise ValueError("non_dominated_sort needs at least one point")

    le = np.all(arr[:, None, :] <= arr[None, :, :], axis=-1)
    lt = np.any(arr[:, None, :] < arr[None, :, :], axis=-1)
    dom = le & lt  # dom[i, j]: i dominates j

    counts = dom.sum(axis=0)
    assigned = np.zeros(n, dtype=bool)
    levels: list[list[int]] = []
    while not assigned.all():
        current = (counts == 0) & ~assigned
        if not current.any():  # numerically impossible; guards bad input
            raise RuntimeError("dominance counting failed to make progress")
        levels.append([int(i) for i in np.flatnonzero(current)])
        assigned |= current
        counts = counts - dom[current].sum(axis=0)
    return levels


def crowding_distance(front: ArrayLike) -> list[float]:
    """NSGA-II crowding: normalized neighbor gaps, infinity at boundaries.

    Objectives with zero range contribute nothing. A front of one or two
    points is all-infinite by the boundary rule.
    """
    arr = _as_points(front)
    n, m = arr.shape
    if n == 0:
        raise ValueError("crowding_distance needs a non-empty front")
    dist = np.zeros(n, dtype=np.float64)
    for j in range(m):
        order = np.argsort(arr[:, j], kind="stable")
        lo, hi = arr[order[0], j], arr[order[-1], j]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = hi - lo
        if span <= 0.0:
            continue
        gaps = (arr[order[2:], j] - arr[order[:-2], j]) / span
        dist[order[1:-1]] += gaps
    return [float(d) for d in dist]


def _staircase(arr: np.ndarray, ref: np.ndarray) -> list[tuple[float, float]]:
    """Non-dominated points strictly inside the reference box, sorted by f1."""
    inside = arr[(arr[:, 0] < ref[0]) & (arr[:, 1] < ref[1])]
    if inside.shape[0] == 0:
        return []
    order = np.lexsort((inside[:, 1], inside[:, 0]))
    stairs: list[tuple[float, float]] = []
    best_f2 = math.inf
    for i in order:
        f1, f2 = float(inside[i, 0]), float(inside[i, 1])
        if f2 < best_f2:
            stairs.append((f1, f2))
            best_f2 = f2
    return stairs


def hypervolume_2d(points: ArrayLike, ref: Sequence[float]) -> float:
    """Exact area dominated by ``points`` within the reference box.

    Points that do not strictly dominate the reference point contribute
    zero. Duplicates and dominated points change nothing.
    """
    arr = _as_points(points)
    refv = np.asarray(ref, dtype=np.float64)
    if refv.shape != (2,) or (arr.size and arr.shape[1] != 2):
        raise UnsupportedDimensionError("hypervolume_2d handles exactly 2 objectives")
    stairs = _staircase(arr, refv)
    if not stairs:
        return 0.0
    hv = 0.0
    for k, (f1, f2) in enumerate(stairs):
        next_f1 = stairs[k + 1][0] if k + 1 < len(stairs) else float(refv[0])
        hv += (next_f1 - f1) * (float(refv[1]) - f2)
    return hv


def hvi(candidate: Sequence[float], front: ArrayLike, ref: Sequence[float]) -> float:
    """Hypervolume gained by adding ``candidate`` to ``front``.

    Zero when the candidate is dominated by (or equal to) a front point or
    does not dominate the reference point. The max() guards float noise.
    """
    arr = _as_points(front)
    cand = np.asarray(candidate, dtype=np.float64).reshape(1, -1)
    joined = np.vstack([arr, cand]) if arr.size else cand
    return max(0.0, hypervolume_2d(joined, ref) - hypervolume_2d(arr, ref))


def greedy_hvi_select(
    candidates: ArrayLike, front: ArrayLike, ref: Sequence[float], q: int
) -> list[int]:
    """Pick up to q candidate indices by repeated argmax hypervolume gain.

    Each pick joins a working front before the next round. Once every
    remaining candidate has zero improvement, leftover slots fill in
    ascending index order. Ties go to the lowest index.
    """
    cand = _as_points(candidates)
    if cand.shape[0] == 0:
        raise ValueError("no candidates to select from")
    if q < 1:
        raise ValueError("q must be >= 1")

    working = [tuple(p) for p in _as_points(front)]
    remaining = list(range(cand.shape[0]))
    selected: list[int] = []
    while remaining and len(selected) < q:
        gains = [hvi(cand[i], working, ref) for i in remaining]
        best_pos = int(np.argmax(gains))  # argmax keeps the first maximum
        if gains[best_pos] <= 0.0:
            break
        chosen = remaining.pop(best_pos)
        selected.append(chosen)
        working.append(tuple(cand[chosen]))

    for i in remaining:
        if len(selected) >= q:
            break
        selected.append(i)
    return selected
