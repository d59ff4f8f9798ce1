"""MIC posterior over dilution bins and the modal / decision-theoretic calls.

Bins are numbered ``1..J+1``: bin ``j <= J`` means ``D_{j-1} < MIC <= D_j``
(with ``D_0 = 0``) and bin ``J+1`` means the MIC is above the highest
dilution.  Only the ``J+1`` monotone growth patterns (growth below the MIC,
no growth at or above it) are admitted; each bin's probability is the
likelihood of its pattern under independent wells, renormalised over the
admissible patterns.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "MicDistribution",
    "LossWeights",
    "Decision",
    "MicCall",
    "mic_distribution",
    "modal_mic",
    "expected_loss",
    "expected_losses",
    "dt_mic",
    "window_prob",
    "call_or_delay",
    "call_mic",
]

_TIE = 1e-12


@dataclass(frozen=True)
class MicDistribution:
    rho: np.ndarray
    valid_sequence_prob: float
    dilutions: tuple[float, ...] | None = None

    @property
    def n_bins(self) -> int:
        return len(self.rho)

    def prob(self, j: int) -> float:
        """``rho_j`` for 1-based bin ``j``; zero outside ``1..J+1``."""
        return float(self.rho[j - 1]) if 1 <= j <= self.n_bins else 0.0

    def dilution(self, j: int) -> float:
        """Upper edge of bin ``j`` (``inf`` for the above-grid bin)."""
        if self.dilutions is None:
            raise ValueError("distribution carries no dilution grid")
        if not 1 <= j <= self.n_bins:
            raise IndexError(j)
        return math.inf if j == self.n_bins else self.dilutions[j - 1]


@dataclass(frozen=True)
class LossWeights:
    """Losses for under-calls by more than one dilution (``w1``), over-calls
    by more than one (``w2``) and misses by exactly one (``w3``)."""

    w1: float = 5.0
    w2: float = 1.0
    w3: float = 0.0

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("loss weights must be non-negative")


class Decision(str, enum.Enum):
    CALL = "Call"
    DELAY = "Delay"


@dataclass(frozen=True)
class MicCall:
    modal_index: int
    modal_prob: float
    dt_index: int
    dt_expected_loss: float
    window_prob: float
    call_decision: Decision


def mic_distribution(pi: Sequence[float], dilutions: Sequence[float] | None = None) -> MicDistribution:
    """Posterior over MIC bins from per-well growth probabilities.

    ``pi[k]`` is the growth probability of well ``k`` (increasing dilution);
    each value must lie strictly inside (0, 1).
    """
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or len(pi) == 0:
        raise ValueError("need a non-empty 1-d vector of growth probabilities")
    if not np.all((pi > 0) & (pi < 1)):
        raise ValueError("growth probabilities must lie strictly inside (0, 1)")
    if dilutions is not None and len(dilutions) != len(pi):
        raise ValueError("dilution grid and probability vector differ in length")
    log_g = np.log(pi)
    log_ng = np.log1p(-pi)
    # log rho_j (unnormalised) = sum_{k<j} log pi_k + sum_{k>=j} log(1 - pi_k)
    grow = np.concatenate([[0.0], np.cumsum(log_g)])
    inhibit = np.concatenate([np.cumsum(log_ng[::-1])[::-1], [0.0]])
    log_rho = grow + inhibit
    log_total = logsumexp(log_rho)
    rho = np.exp(log_rho - log_total)
    rho /= rho.sum()
    rho.flags.writeable = False
    return MicDistribution(
        rho=rho,
        valid_sequence_prob=float(np.exp(log_total)),
        dilutions=None if dilutions is None else tuple(float(d) for d in dilutions),
    )


def modal_mic(dist: MicDistribution) -> int:
    """Bin with the largest probability; ties go to the higher bin."""
    rho = dist.rho
    return int(np.flatnonzero(rho >= rho.max())[-1]) + 1


def expected_losses(dist: MicDistribution, w: LossWeights = LossWeights()) -> np.ndarray:
    """Expected loss of calling each bin ``1..J+1``."""
    rho = np.asarray(dist.rho)
    m = len(rho)
    # above[i] = sum_{k >= i} rho_k (0-based), padded so out-of-range is 0.
    above = np.concatenate([np.cumsum(rho[::-1])[::-1], [0.0, 0.0]])
    below = np.concatenate([[0.0], np.cumsum(rho)])  # below[i] = sum_{k < i}
    padded = np.concatenate([[0.0], rho, [0.0]])
    out = np.empty(m)
    for i in range(m):  # i is the 0-based index of bin j = i + 1
        under = above[i + 2]
        over = below[max(i - 1, 0)]
        near = padded[i] + padded[i + 2]
        out[i] = w.w1 * under + w.w2 * over + w.w3 * near
    return out


def expected_loss(dist: MicDistribution, j: int, w: LossWeights = LossWeights()) -> float:
    """Expected loss of calling bin ``j`` (1-based)."""
    if not 1 <= j <= dist.n_bins:
        raise IndexError(f"bin {j} outside 1..{dist.n_bins}")
    return float(expected_losses(dist, w)[j - 1])


def dt_mic(dist: MicDistribution, w: LossWeights = LossWeights()) -> int:
    """Bin minimising expected loss.

    Losses within ``1e-12`` of the minimum are ties, broken by the larger
    ``rho`` and then by the higher bin.
    """
    losses = expected_losses(dist, w)
    tied = np.flatnonzero(losses <= losses.min() + _TIE)
    rho = np.asarray(dist.rho)[tied]
    best = tied[rho >= rho.max()]
    return int(best[-1]) + 1


def window_prob(dist: MicDistribution, j: int) -> float:
    """Mass of bins ``j-1, j, j+1``, truncated at the grid ends."""
    return dist.prob(j - 1) + dist.prob(j) + dist.prob(j + 1)


def call_or_delay(dist: MicDistribution, estimate_index: int, threshold: float = 0.9) -> Decision:
    """Call when the estimate +/- one dilution holds at least ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    return Decision.CALL if window_prob(dist, estimate_index) >= threshold else Decision.DELAY


def call_mic(
    dist: MicDistribution, w: LossWeights = LossWeights(), threshold: float = 0.9
) -> MicCall:
    """Modal and decision-theoretic calls, gated on the DT estimate's window."""
    modal = modal_mic(dist)
    dt = dt_mic(dist, w)
    return MicCall(
        modal_index=modal,
        modal_prob=dist.prob(modal),
        dt_index=dt,
        dt_expected_loss=expected_loss(dist, dt, w),
        window_prob=window_prob(dist, dt),
        call_decision=call_or_delay(dist, dt, threshold),
    )
