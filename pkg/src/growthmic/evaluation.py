"""Validation protocol: panel split, essential and categorical agreement,
and residual tables.

Calls are ``(estimate_bin, reference_bin)`` pairs of 1-based MIC bins; on a
two-fold grid a bin difference is a log2 difference.  An above-grid value
occupies bin ``J+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mic import LossWeights, MicDistribution, dt_mic, expected_loss, modal_mic

__all__ = [
    "AgreementReport",
    "SirBreakpoints",
    "CategoricalReport",
    "ResidualRow",
    "ResidualTable",
    "split_panels",
    "essential_agreement",
    "categorical_agreement",
    "classify_sir",
    "residual_table",
    "format_agreement_table",
    "mic_to_bin",
]


def mic_to_bin(mic: float, dilutions: Sequence[float]) -> int:
    """1-based bin of an MIC value on the grid; above-grid maps to ``J+1``."""
    if math.isinf(mic):
        return len(dilutions) + 1
    for j, d in enumerate(dilutions, start=1):
        if math.isclose(mic, d, rel_tol=1e-9):
            return j
    raise ValueError(f"MIC {mic} is not on the dilution grid")


def split_panels(panels: Sequence, train_fraction: float = 0.65, seed: int = 0):
    """Random panel-level split into ``(train, validation)``.

    The training size is ``floor(train_fraction * n + 0.5)`` (round half up).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    panels = list(panels)
    if not panels:
        raise ValueError("no panels to split")
    n_train = int(math.floor(train_fraction * len(panels) + 0.5))
    order = np.random.default_rng(seed).permutation(len(panels))
    train = [panels[i] for i in sorted(order[:n_train])]
    valid = [panels[i] for i in sorted(order[n_train:])]
    return train, valid


@dataclass(frozen=True)
class AgreementReport:
    n: int
    under: int
    within: int
    over: int

    def _pct(self, count):
        return 100.0 * count / self.n if self.n else 0.0

    @property
    def under_pct(self) -> float:
        return self._pct(self.under)

    @property
    def within_pct(self) -> float:
        return self._pct(self.within)

    @property
    def over_pct(self) -> float:
        return self._pct(self.over)

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "under": self.under,
            "within": self.within,
            "over": self.over,
            "under_pct": round(self.under_pct, 2),
            "within_pct": round(self.within_pct, 2),
            "over_pct": round(self.over_pct, 2),
        }


def essential_agreement(calls: Sequence[tuple[int, int]]) -> AgreementReport:
    """Count calls under by more than one bin, within one, and over by more."""
    diff = np.array([e - r for e, r in calls], dtype=int).reshape(-1)
    return AgreementReport(
        n=len(diff),
        under=int(np.sum(diff < -1)),
        within=int(np.sum(np.abs(diff) <= 1)),
        over=int(np.sum(diff > 1)),
    )


@dataclass(frozen=True)
class SirBreakpoints:
    susceptible_max: float
    resistant_min: float

    def __post_init__(self):
        if not self.susceptible_max < self.resistant_min:
            raise ValueError("susceptible_max must be below resistant_min")


def classify_sir(mic: float, bp: SirBreakpoints) -> str:
    if mic <= bp.susceptible_max:
        return "S"
    if mic >= bp.resistant_min:
        return "R"
    return "I"


@dataclass(frozen=True)
class CategoricalReport:
    n: int
    n_susceptible: int
    n_intermediate: int
    n_resistant: int
    agree: int
    very_major: int
    major: int
    minor: int

    @property
    def agreement_pct(self) -> float:
        return 100.0 * self.agree / self.n if self.n else 0.0

    @property
    def very_major_pct(self) -> float:
        """Share of reference-resistant isolates called susceptible (0 if none)."""
        return 100.0 * self.very_major / self.n_resistant if self.n_resistant else 0.0

    @property
    def major_pct(self) -> float:
        """Share of reference-susceptible isolates called resistant (0 if none)."""
        return 100.0 * self.major / self.n_susceptible if self.n_susceptible else 0.0

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "n_S": self.n_susceptible,
            "n_I": self.n_intermediate,
            "n_R": self.n_resistant,
            "agreement_pct": round(self.agreement_pct, 2),
            "very_major": self.very_major,
            "very_major_pct": round(self.very_major_pct, 2),
            "major": self.major,
            "major_pct": round(self.major_pct, 2),
            "minor": self.minor,
        }


def categorical_agreement(
    calls: Sequence[tuple[int, int]], breakpoints: SirBreakpoints, dilutions: Sequence[float]
) -> CategoricalReport:
    """SIR agreement of bin calls, reading each bin as its upper dilution."""
    edges = list(dilutions) + [math.inf]
    counts = {"S": 0, "I": 0, "R": 0}
    agree = vme = me = minor = 0
    for est, ref in calls:
        e = classify_sir(edges[est - 1], breakpoints)
        r = classify_sir(edges[ref - 1], breakpoints)
        counts[r] += 1
        if e == r:
            agree += 1
        elif e == "S" and r == "R":
            vme += 1
        elif e == "R" and r == "S":
            me += 1
        else:
            minor += 1
    return CategoricalReport(len(calls), counts["S"], counts["I"], counts["R"], agree, vme, me, minor)


@dataclass(frozen=True)
class ResidualRow:
    residual: int
    modal_loss: float
    dt_loss: float


@dataclass(frozen=True)
class ResidualTable:
    rows: tuple[ResidualRow, ...]
    # Indices of rows whose modal bin holds at least the filter probability.
    confident: tuple[int, ...]

    def confident_rows(self) -> tuple[ResidualRow, ...]:
        return tuple(self.rows[i] for i in self.confident)


def residual_table(
    calls: Sequence[tuple[int, int]],
    distributions: Sequence[MicDistribution],
    weights: LossWeights = LossWeights(),
    min_modal_prob: float = 0.5,
) -> ResidualTable:
    """Per-panel log2 residual, ``1 - P(modal)`` and the loss at the DT call."""
    if len(calls) != len(distributions):
        raise ValueError("calls and distributions differ in length")
    rows, confident = [], []
    for i, ((est, ref), dist) in enumerate(zip(calls, distributions)):
        p_modal = dist.prob(modal_mic(dist))
        rows.append(
            ResidualRow(
                residual=int(est - ref),
                modal_loss=1.0 - p_modal,
                dt_loss=expected_loss(dist, dt_mic(dist, weights), weights),
            )
        )
        if p_modal >= min_modal_prob:
            confident.append(i)
    return ResidualTable(tuple(rows), tuple(confident))


def format_agreement_table(reports: dict[str, AgreementReport], title: str = "") -> str:
    """Three-column text table of essential agreement percentages."""
    head = f"{'Estimate':<28}{'EST-REF < -1':>14}{'|EST-REF| <= 1':>16}{'EST-REF > 1':>14}"
    lines = [title] if title else []
    lines += [head, "-" * len(head)]
    for name, rep in reports.items():
        lines.append(f"{name:<28}{rep.under_pct:>14.2f}{rep.within_pct:>16.2f}{rep.over_pct:>14.2f}")
    return "\n".join(lines)
