"""Confidence-bound acquisition scores for the surrogate problem.

All internal objectives are normalized ranks in minimization sense, so the
optimistic bound is mean minus beta times the ensemble disagreement. The
exploration weight can decay over iterations to shift the search from
exploring uncertain regions toward exploiting the predicted best ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SCHEDULES = ("constant", "inverse_sqrt")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Exploration weight and its decay schedule."""

    beta0: float = 2.0
    schedule: str = "inverse_sqrt"

    def __post_init__(self):
        if not (math.isfinite(self.beta0) and self.beta0 >= 0):
            raise ValueError(f"beta0 must be finite and >= 0, got {self.beta0}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")


def beta_at(cfg: AcquisitionConfig, t: int, total_iterations: int | None = None) -> float:
    """Exploration weight at iteration t (0-based); non-increasing in t."""
    if t < 0:
        raise ValueError("iteration index must be >= 0")
    if cfg.schedule == "constant":
        return cfg.beta0
    return cfg.beta0 / math.sqrt(t + 1)


def ucb_score(mean, std, beta: float):
    """Optimistic score under minimization: mean - beta * std.

    Accepts scalars or numpy arrays elementwise.
    """
    return mean - beta * std
