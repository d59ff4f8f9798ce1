"""Incubation state machine driven by the growth-control redox curve."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .smooth import SmoothedCurve

__all__ = [
    "ReadinessParams",
    "Insufficient",
    "Continue",
    "Ready",
    "Failed",
    "IncubationStatus",
    "assess_readiness",
]


@dataclass(frozen=True)
class ReadinessParams:
    """Thresholds for the time-to-result decision.

    ``low_redox`` and ``high_redox`` bound the "keep incubating" band of the
    maximum control redox; a panel not ready by ``max_hours`` has failed.
    Controls crossing ``high_redox`` no later than ``fast_cutoff_hours`` are
    classed as fast growers.
    """

    low_redox: float = 0.07
    high_redox: float = 0.2
    max_hours: float = 16.0
    fast_cutoff_hours: float = 8.0

    def __post_init__(self):
        if not 0.0 < self.low_redox < self.high_redox < 1.0:
            raise ValueError("need 0 < low_redox < high_redox < 1")
        if not 0.0 < self.fast_cutoff_hours < self.max_hours:
            raise ValueError("need 0 < fast_cutoff_hours < max_hours")


@dataclass(frozen=True)
class Insufficient:
    max_redox: float


@dataclass(frozen=True)
class Continue:
    max_redox: float


@dataclass(frozen=True)
class Ready:
    time_to_result: float
    growth_class: Literal["fast", "slow"]


@dataclass(frozen=True)
class Failed:
    max_redox: float


IncubationStatus = Union[Insufficient, Continue, Ready, Failed]


def assess_readiness(
    control_redox: SmoothedCurve,
    elapsed: float,
    params: ReadinessParams = ReadinessParams(),
) -> IncubationStatus:
    """Decide the incubation status of a panel after ``elapsed`` hours.

    The smoothed control redox is inspected on its own sample grid.  Ready
    fires at the first grid time whose running maximum exceeds
    ``params.high_redox``; that time is the time-to-result and is frozen
    for every later ``elapsed``.
    """
    grid = control_redox.t
    if elapsed < grid[0]:
        raise ValueError("elapsed precedes the first sample")
    grid = grid[(grid <= elapsed) & (grid <= params.max_hours)]
    if len(grid):
        values = control_redox.derivatives(grid)[:, 0]
        running = np.maximum.accumulate(values)
        above = np.flatnonzero(running > params.high_redox)
        if len(above):
            t_result = float(grid[above[0]])
            cls = "fast" if t_result <= params.fast_cutoff_hours else "slow"
            return Ready(t_result, cls)
        peak = float(running[-1])
    else:
        peak = float("-inf")
    if elapsed > params.max_hours:
        return Failed(peak)
    if peak > params.low_redox:
        return Continue(peak)
    return Insufficient(peak)
