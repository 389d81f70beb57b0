"""Cross-run comparison: aligned hypervolume traces and win rates.

Runs are only comparable when they were produced against the same
reference point, so alignment refuses mixed references outright.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Sequence

from .search import RunResult

Trace = Sequence[tuple[int, float]]


@dataclass(frozen=True)
class ComparisonReport:
    grid: tuple[int, ...]
    traces: dict[str, list[tuple[float, ...]]]  # strategy -> per-run aligned values
    seeds: dict[str, list[int]]
    summary: dict[str, dict[str, float]]  # strategy -> {median,min,max} of final HV
    reference_point: tuple[float, ...]


def step_interpolate(trace: Trace, grid: Sequence[int]) -> tuple[float, ...]:
    """Last-value-carried-forward onto the grid; 0.0 before the first entry."""
    values = []
    for g in grid:
        current = 0.0
        for evals, hv in trace:
            if evals <= g:
                current = hv
            else:
                break
        values.append(float(current))
    return tuple(values)


def align_traces(runs: Sequence[RunResult], grid: Sequence[int]) -> ComparisonReport:
    """Align every run's trace onto one evaluation grid, grouped by strategy."""
    if not runs:
        raise ValueError("no runs to align")
    refs = {r.reference_point for r in runs}
    if len(refs) != 1 or None in refs:
        raise ValueError(f"runs must share one reference point, got {sorted(map(str, refs))}")
    grid_t = tuple(int(g) for g in grid)
    if any(b <= a for a, b in zip(grid_t, grid_t[1:])):
        raise ValueError("grid must be strictly increasing")

    traces: dict[str, list[tuple[float, ...]]] = {}
    seeds: dict[str, list[int]] = {}
    for run in runs:
        traces.setdefault(run.strategy, []).append(step_interpolate(run.hv_trace, grid_t))
        seeds.setdefault(run.strategy, []).append(run.config.seed)

    summary = {}
    for strategy, rows in traces.items():
        finals = [row[-1] for row in rows]
        summary[strategy] = {
            "median": float(statistics.median(finals)),
            "min": float(min(finals)),
            "max": float(max(finals)),
        }
    return ComparisonReport(
        grid=grid_t,
        traces=traces,
        seeds=seeds,
        summary=summary,
        reference_point=tuple(next(iter(refs))),
    )


def _final(trace: Trace) -> float:
    if not trace:
        return 0.0
    last = trace[-1]
    return float(last[1] if isinstance(last, (tuple, list)) else last)


def win_rate(a_traces: Sequence[Trace], b_traces: Sequence[Trace], strict: bool = False) -> float:
    """Fraction of seed pairs where a's final hypervolume beats b's.

    Ties count as wins for the first argument unless ``strict``.
    """
    if len(a_traces) != len(b_traces):
        raise ValueError(f"seed counts differ: {len(a_traces)} vs {len(b_traces)}")
    if not a_traces:
        raise ValueError("need at least one seed")
    wins = 0
    for ta, tb in zip(a_traces, b_traces):
        fa, fb = _final(ta), _final(tb)
        if (fa > fb) or (not strict and fa == fb):
            wins += 1
    return wins / len(a_traces)


def report_to_csv(report: ComparisonReport) -> str:
    """Grid by per-strategy median table, one row per grid point."""
    strategies = sorted(report.traces)
    lines = [",".join(["evals"] + strategies)]
    for i, g in enumerate(report.grid):
        row = [str(g)]
        for s in strategies:
            row.append(repr(statistics.median(tr[i] for tr in report.traces[s])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def format_summary(report: ComparisonReport) -> str:
    """Human-readable final-hypervolume summary per strategy."""
    lines = [
        f"reference point: {list(report.reference_point)}",
        f"{'strategy':<12} {'runs':>4} {'median':>16} {'min':>16} {'max':>16}",
    ]
    for strategy in sorted(report.summary):
        s = report.summary[strategy]
        n = len(report.traces[strategy])
        lines.append(
            f"{strategy:<12} {n:>4} {s['median']:>16.8g} {s['min']:>16.8g} {s['max']:>16.8g}"
        )
    return "\n".join(lines)
