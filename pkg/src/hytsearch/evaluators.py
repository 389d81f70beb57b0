"""Pluggable objective evaluators.

Every evaluator reports raw objective values in their natural user-facing
sense (e.g. accuracy as a fraction to maximize) together with a per
objective transform that maps them into the minimization sense used by the
whole search pipeline. The transform is its own inverse, so user-sense
reporting is an exact round trip.

Built-in backends: ZDT benchmark functions over genome unit vectors, a
deterministic analytic accuracy/cost proxy over decoded architectures, a
tabular lookup for pre-evaluated genomes, and a subprocess protocol for
plugging in real trainers or hardware measurement.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .space import (
    Genome,
    SearchSpaceSpec,
    decode,
    flops_estimate,
    param_count,
    to_unit_vector,
    validate_genome,
)

TRANSFORMS = ("none", "one-minus", "negate")

# Analytic proxy constants: error floor, error range, and the parameter
# scale over which the error saturates. Chosen so genomes spanning ~10^4 to
# ~10^6 parameters cover a non-saturated error range; these are engine
# constants, not claims about real model accuracy.
PROXY_ERROR_FLOOR = 0.05
PROXY_ERROR_RANGE = 0.45
PROXY_PARAM_SCALE = 5.0e5


class EvaluationError(RuntimeError):
    """An objective evaluation failed; carries the genome and diagnostics."""

    def __init__(self, message: str, genome: Genome | None = None, diagnostics: dict | None = None):
        super().__init__(message)
        self.genome = genome
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class EvaluationRecord:
    """One archived evaluation: raw user-sense values plus the minimized
    vector the optimizer works on."""

    genome: Genome
    raw: tuple[float, ...]
    minimized: tuple[float, ...]
    wall_time: float


def apply_transform(kind: str, v: float) -> float:
    if kind == "none":
        return v
    if kind == "one-minus":
        return 1.0 - v
    if kind == "negate":
        return -v
    raise ValueError(f"unknown transform {kind!r}")


class Evaluator:
    """Base class: genome validation, sense transforms, parallelism hint."""

    #: max concurrent evaluate() calls; None means unbounded
    max_parallelism: int | None = None

    def __init__(
        self,
        space,
        objective_names: Sequence[str],
        transforms: Sequence[str],
    ):
        if len(objective_names) != len(transforms):
            raise ValueError("objective_names and transforms must have equal length")
        for t in transforms:
            if t not in TRANSFORMS:
                raise ValueError(f"unknown transform {t!r}, expected one of {TRANSFORMS}")
        self.space = space
        self.objective_names = tuple(objective_names)
        self.transforms = tuple(transforms)

    @property
    def n_objectives(self) -> int:
        return len(self.objective_names)

    @property
    def senses(self) -> tuple[str, ...]:
        """User-facing direction per objective ("min" or "max")."""
        return tuple("min" if t == "none" else "max" for t in self.transforms)

    def to_minimized(self, raw: Sequence[float]) -> tuple[float, ...]:
        return tuple(apply_transform(t, float(v)) for t, v in zip(self.transforms, raw))

    def to_user(self, minimized: Sequence[float]) -> tuple[float, ...]:
        # every transform is an involution
        return self.to_minimized(minimized)

    def evaluate(self, genome: Genome) -> tuple[float, ...]:
        """Validate the genome, evaluate it, and check the result is finite."""
        g = validate_genome(self.space, genome)
        raw = tuple(float(v) for v in self._evaluate(g))
        if len(raw) != self.n_objectives:
            raise EvaluationError(
                f"evaluator returned {len(raw)} objectives, expected {self.n_objectives}",
                genome=g,
            )
        if not all(math.isfinite(v) for v in raw):
            raise EvaluationError(f"non-finite objective values {raw}", genome=g)
        return raw

    def _evaluate(self, genome: Genome) -> Sequence[float]:
        raise NotImplementedError


def evaluate_record(evaluator: Evaluator, genome: Genome) -> EvaluationRecord:
    start = time.perf_counter()
    raw = evaluator.evaluate(genome)
    wall = time.perf_counter() - start
    return EvaluationRecord(
        genome=tuple(int(g) for g in genome),
        raw=raw,
        minimized=evaluator.to_minimized(raw),
        wall_time=wall,
    )


def evaluate_records(
    evaluator: Evaluator, genomes: Sequence[Genome], jobs: int = 1
) -> list[EvaluationRecord]:
    """Evaluate a batch, preserving input order in the results.

    Concurrency is capped by both ``jobs`` and the evaluator's own
    parallelism hint; the default is fully sequential.
    """
    hint = evaluator.max_parallelism
    effective = jobs if hint is None else min(jobs, hint)
    if effective <= 1 or len(genomes) <= 1:
        return [evaluate_record(evaluator, g) for g in genomes]
    with ThreadPoolExecutor(max_workers=effective) as pool:
        return list(pool.map(lambda g: evaluate_record(evaluator, g), genomes))


# ---------------------------------------------------------------------------
# Synthetic benchmarks
# ---------------------------------------------------------------------------


def zdt_evaluate(variant: str, u: Sequence[float]) -> np.ndarray:
    """ZDT1/ZDT2 objectives for a unit vector (both minimized).

    f1 = u0, g = 1 + 9 * mean(u[1:]); ZDT1 has f2 = g * (1 - sqrt(f1/g)),
    ZDT2 squares the ratio instead.
    """
    uv = np.asarray(u, dtype=np.float64).ravel()
    if uv.size < 2:
        raise ValueError("ZDT needs at least 2 dimensions")
    if np.any(uv < 0.0) or np.any(uv > 1.0):
        bad = int(np.argmax((uv < 0.0) | (uv > 1.0)))
        raise ValueError(f"component {bad} = {uv[bad]} outside [0, 1]")
    f1 = uv[0]
    g = 1.0 + 9.0 * float(np.mean(uv[1:]))
    if variant == "zdt1":
        f2 = g * (1.0 - math.sqrt(f1 / g))
    elif variant == "zdt2":
        f2 = g * (1.0 - (f1 / g) ** 2)
    else:
        raise ValueError(f"unknown ZDT variant {variant!r}")
    return np.array([f1, f2])


class ZdtEvaluator(Evaluator):
    """ZDT benchmark over the genome's unit-vector embedding."""

    def __init__(self, space, variant: str = "zdt1"):
        if variant not in ("zdt1", "zdt2"):
            raise ValueError(f"unknown ZDT variant {variant!r}")
        super().__init__(space, objective_names=("f1", "f2"), transforms=("none", "none"))
        self.variant = variant
        if space.genome_length < 2:
            raise ValueError("ZDT needs a space with at least 2 genes")

    def _evaluate(self, genome: Genome) -> np.ndarray:
        return zdt_evaluate(self.variant, to_unit_vector(self.space, genome))


def analytic_proxy_evaluate(space: SearchSpaceSpec, genome: Genome) -> tuple[float, float]:
    """Deterministic (error fraction, MAC count) stand-in for trained
    accuracy and measured latency predictors.

    Error decays exponentially with the parameter count toward a fixed
    floor, so shrinking the model always costs task quality while the MAC
    count grows; the two objectives genuinely conflict.
    """
    d = decode(space, genome)
    p = param_count(d)
    error = PROXY_ERROR_FLOOR + PROXY_ERROR_RANGE * math.exp(-p / PROXY_PARAM_SCALE)
    return error, flops_estimate(d)


class AnalyticProxyEvaluator(Evaluator):
    """Closed-form error/cost proxy over decoded architectures."""

    def __init__(self, space: SearchSpaceSpec):
        super().__init__(space, objective_names=("error", "macs"), transforms=("none", "none"))

    def _evaluate(self, genome: Genome) -> tuple[float, float]:
        return analytic_proxy_evaluate(self.space, genome)


# ---------------------------------------------------------------------------
# Lookup and subprocess backends
# ---------------------------------------------------------------------------


class TabularEvaluator(Evaluator):
    """Objectives read from a CSV of pre-evaluated genomes.

    Format: header ``g0,...,g{L-1},<name1>,<name2>``, one row per genome,
    values in user sense. Keys must be unique; lookups of genomes absent
    from the table fail.
    """

    def __init__(self, space, path: str | Path, transforms: Sequence[str] | None = None):
        self.path = Path(path)
        length = space.genome_length
        names, table = self._load(self.path, length)
        super().__init__(
            space,
            objective_names=names,
            transforms=tuple(transforms) if transforms else ("none",) * len(names),
        )
        if len(self.transforms) != len(names):
            raise ValueError(
                f"{len(self.transforms)} transforms for {len(names)} objectives"
            )
        self._table = table

    @staticmethod
    def _load(path: Path, length: int) -> tuple[tuple[str, ...], dict[Genome, tuple[float, ...]]]:
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ValueError(f"{path}: empty table")
        header = [h.strip() for h in lines[0].split(",")]
        expected_genes = [f"g{i}" for i in range(length)]
        if header[:length] != expected_genes:
            raise ValueError(
                f"{path}: line 1: gene columns must be {expected_genes[0]}..{expected_genes[-1]}"
            )
        names = tuple(header[length:])
        if not names:
            raise ValueError(f"{path}: line 1: no objective columns")
        table: dict[Genome, tuple[float, ...]] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != length + len(names):
                raise ValueError(
                    f"{path}: line {lineno}: expected {length + len(names)} cells, got {len(cells)}"
                )
            try:
                key = tuple(int(c) for c in cells[:length])
                values = tuple(float(c) for c in cells[length:])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if key in table:
                raise ValueError(f"{path}: line {lineno}: duplicate genome {','.join(map(str, key))}")
            table[key] = values
        return names, table

    def __len__(self) -> int:
        return len(self._table)

    def _evaluate(self, genome: Genome) -> tuple[float, ...]:
        try:
            return self._table[tuple(genome)]
        except KeyError:
            raise EvaluationError(
                f"genome {','.join(map(str, genome))} not present in {self.path}",
                genome=tuple(genome),
            ) from None


class ExternalCommandEvaluator(Evaluator):
    """Spawns a command per evaluation and speaks a line-JSON protocol.

    Request (stdin):  ``{"genes": [0, 3, 1, ...]}`` followed by a newline.
    Reply (stdout):   ``{"objectives": [v1, v2]}`` on the first line.
    Nonzero exit, timeout, or a malformed reply raise
    :class:`EvaluationError` with captured output attached. This protocol
    is a stability-guaranteed interface.
    """

    max_parallelism = 1

    def __init__(
        self,
        space,
        argv: Sequence[str],
        objective_names: Sequence[str] = ("objective_0", "objective_1"),
        transforms: Sequence[str] | None = None,
        timeout: float = 60.0,
    ):
        super().__init__(
            space,
            objective_names=objective_names,
            transforms=tuple(transforms) if transforms else ("none",) * len(objective_names),
        )
        if not argv:
            raise ValueError("external evaluator needs a command")
        self.argv = [str(a) for a in argv]
        self.timeout = timeout

    def _evaluate(self, genome: Genome) -> tuple[float, ...]:
        request = json.dumps({"genes": [int(g) for g in genome]}) + "\n"
        try:
            proc = subprocess.run(
                self.argv,
                input=request,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise EvaluationError(
                f"evaluator command timed out after {self.timeout}s",
                genome=tuple(genome),
                diagnostics={"argv": self.argv, "stdout": str(exc.stdout), "stderr": str(exc.stderr)},
            ) from None
        except OSError as exc:
            raise EvaluationError(
                f"could not launch evaluator command: {exc}",
                genome=tuple(genome),
                diagnostics={"argv": self.argv},
            ) from None

        diag = {"argv": self.argv, "stdout": proc.stdout[-2000:], "stderr": proc.stderr[-2000:]}
        if proc.returncode != 0:
            raise EvaluationError(
                f"evaluator command exited with status {proc.returncode}",
                genome=tuple(genome),
                diagnostics=diag,
            )
        first_line = proc.stdout.splitlines()[0] if proc.stdout.splitlines() else ""
        try:
            reply = json.loads(first_line)
            values = reply["objectives"]
            if not isinstance(values, list) or len(values) != self.n_objectives:
                raise ValueError(f"expected {self.n_objectives} objectives, got {values!r}")
            return tuple(float(v) for v in values)
        except (ValueError, KeyError, TypeError) as exc:
            raise EvaluationError(
                f"malformed evaluator reply: {exc}",
                genome=tuple(genome),
                diagnostics=diag,
            ) from None


def build_evaluator(space, spec: dict) -> Evaluator:
    """Construct an evaluator from a config mapping ({"kind": ..., ...})."""
    kind = spec.get("kind")
    if kind in ("zdt1", "zdt2"):
        return ZdtEvaluator(space, variant=kind)
    if kind == "analytic-proxy":
        return AnalyticProxyEvaluator(space)
    if kind == "tabular":
        return TabularEvaluator(space, spec["path"], transforms=spec.get("transforms"))
    if kind == "external":
        return ExternalCommandEvaluator(
            space,
            argv=spec["argv"],
            objective_names=tuple(spec.get("objective_names", ("objective_0", "objective_1"))),
            transforms=spec.get("transforms"),
            timeout=float(spec.get("timeout", 60.0)),
        )
    raise ValueError(f"unknown evaluator kind {kind!r}")
