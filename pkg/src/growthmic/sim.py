"""Synthetic growth-curve panels.

A panel is one isolate x drug test: ``J`` wells at two-fold increasing
dilutions plus a drug-free growth control.  Wells below the true MIC grow
along a logistic curve, wells at or above it stay at a noisy zero baseline,
and a small fraction of panels carry an "outlier" well that grows above the
MIC.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "ABOVE_GRID",
    "FOX_DILUTIONS",
    "PIP_DILUTIONS",
    "TURBIDITY_MAX",
    "SimulationConfig",
    "Well",
    "RawPanel",
    "logistic_curve",
    "simulate_panel",
    "simulate_dataset",
]

#: Sentinel reference MIC for isolates that grow in every well.
ABOVE_GRID = math.inf
TURBIDITY_MAX = 2.25
REDOX_MAX = 1.0

FOX_DILUTIONS = tuple(2.0**k for k in range(-1, 6))
PIP_DILUTIONS = tuple(2.0**k for k in range(-2, 8))


def _check_range(name, rng, positive=True):
    lo, hi = rng
    if lo > hi:
        raise ValueError(f"{name}: lower bound exceeds upper bound")
    if positive and lo <= 0:
        raise ValueError(f"{name}: bounds must be positive")


@dataclass(frozen=True)
class SimulationConfig:
    n_panels: int = 100
    dilutions: tuple[float, ...] = FOX_DILUTIONS
    tick_minutes: float = 20.0
    max_hours: float = 16.0
    growth_rate_range: tuple[float, float] = (0.6, 1.2)
    inflection_time_range: tuple[float, float] = (4.0, 8.0)
    asymptote_range: tuple[float, float] = (1.0, 2.0)
    redox_asymptote_range: tuple[float, float] = (0.6, 0.95)
    noise_sd: float = 0.02
    outlier_rate: float = 0.0
    offscale_mic_rate: float = 0.05
    # Fractional loss of asymptote in a sub-MIC well, scaled by dilution/MIC.
    sub_mic_attenuation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dilutions", tuple(float(d) for d in self.dilutions))
        object.__setattr__(
            self, "growth_rate_range", tuple(map(float, self.growth_rate_range))
        )
        object.__setattr__(
            self, "inflection_time_range", tuple(map(float, self.inflection_time_range))
        )
        object.__setattr__(self, "asymptote_range", tuple(map(float, self.asymptote_range)))
        object.__setattr__(
            self, "redox_asymptote_range", tuple(map(float, self.redox_asymptote_range))
        )
        if self.n_panels < 0:
            raise ValueError("n_panels must be non-negative")
        d = np.asarray(self.dilutions)
        if len(d) < 1 or np.any(d <= 0):
            raise ValueError("dilutions must be a non-empty list of positive values")
        if np.any(d[1:] != 2.0 * d[:-1]):
            raise ValueError("dilutions must form a two-fold increasing series")
        if self.tick_minutes <= 0 or self.max_hours <= 0:
            raise ValueError("tick_minutes and max_hours must be positive")
        _check_range("growth_rate_range", self.growth_rate_range)
        _check_range("inflection_time_range", self.inflection_time_range)
        _check_range("asymptote_range", self.asymptote_range)
        _check_range("redox_asymptote_range", self.redox_asymptote_range)
        if self.asymptote_range[1] > TURBIDITY_MAX or self.redox_asymptote_range[1] > REDOX_MAX:
            raise ValueError("asymptotes exceed the signal range")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        for name in ("outlier_rate", "offscale_mic_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.sub_mic_attenuation < 1.0:
            raise ValueError("sub_mic_attenuation must lie in [0, 1)")

    @property
    def times(self) -> np.ndarray:
        n_ticks = int(math.floor(self.max_hours * 60.0 / self.tick_minutes + 1e-9)) + 1
        return np.arange(n_ticks) * (self.tick_minutes / 60.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Well:
    dilution: float
    turbidity: np.ndarray
    redox: np.ndarray


@dataclass(frozen=True)
class RawPanel:
    """One panel: test wells sorted by dilution, plus the growth control."""

    panel_id: str
    times: np.ndarray
    wells: tuple[Well, ...]
    control: Well
    reference_mic: float
    is_outlier: bool = False
    params: dict = field(default_factory=dict, compare=False)

    @property
    def dilutions(self) -> np.ndarray:
        return np.array([w.dilution for w in self.wells])


def logistic_curve(t, asymptote: float, rate: float, inflection: float) -> np.ndarray:
    """Logistic growth shifted so the curve starts exactly at zero."""
    t = np.asarray(t, dtype=float)
    base = 1.0 / (1.0 + math.exp(rate * inflection))
    s = 1.0 / (1.0 + np.exp(-rate * (t - inflection)))
    return asymptote * (s - base) / (1.0 - base)


def _noisy(signal, rng, sd, hi):
    if sd > 0:
        signal = signal + rng.normal(0.0, sd, size=signal.shape)
    return np.clip(signal, 0.0, hi)


def simulate_panel(config: SimulationConfig, panel_index: int) -> RawPanel:
    """Generate panel ``panel_index``; a pure function of ``(config.seed, panel_index)``."""
    if not 0 <= panel_index < config.n_panels:
        raise IndexError(f"panel_index {panel_index} out of range [0, {config.n_panels})")
    rng = np.random.default_rng([config.seed, panel_index])
    times = config.times
    dil = config.dilutions
    J = len(dil)

    rate = rng.uniform(*config.growth_rate_range)
    t0 = rng.uniform(*config.inflection_time_range)
    amp = rng.uniform(*config.asymptote_range)
    redox_amp = rng.uniform(*config.redox_asymptote_range)
    offscale = rng.random() < config.offscale_mic_rate
    mic_index = J + 1 if offscale else int(rng.integers(1, J + 1))
    mic = ABOVE_GRID if offscale else dil[mic_index - 1]
    outlier_draw = rng.random() < config.outlier_rate
    outlier_pick = rng.random()

    def growth(scale):
        turb = logistic_curve(times, amp * scale, rate, t0)
        red = logistic_curve(times, redox_amp * scale, rate, t0)
        return turb, red

    flat = np.zeros_like(times)
    above = [j for j in range(J) if dil[j] >= mic]
    outlier_well = None
    if outlier_draw and above:
        outlier_well = above[min(int(outlier_pick * len(above)), len(above) - 1)]

    wells = []
    for j, d in enumerate(dil):
        if d < mic:
            turb, red = growth(1.0 - config.sub_mic_attenuation * d / mic)
        elif j == outlier_well:
            turb, red = growth(1.0)
        else:
            turb, red = flat, flat
        wells.append(
            Well(
                d,
                _noisy(turb, rng, config.noise_sd, TURBIDITY_MAX),
                _noisy(red, rng, config.noise_sd, REDOX_MAX),
            )
        )
    turb, red = growth(1.0)
    control = Well(
        0.0,
        _noisy(turb, rng, config.noise_sd, TURBIDITY_MAX),
        _noisy(red, rng, config.noise_sd, REDOX_MAX),
    )
    return RawPanel(
        panel_id=f"P{panel_index:05d}",
        times=times,
        wells=tuple(wells),
        control=control,
        reference_mic=mic,
        is_outlier=outlier_well is not None,
        params={
            "growth_rate": rate,
            "inflection_time": t0,
            "asymptote": amp,
            "redox_asymptote": redox_amp,
            "outlier_well": None if outlier_well is None else outlier_well + 1,
        },
    )


def simulate_dataset(config: SimulationConfig) -> tuple[list[RawPanel], dict]:
    """Generate every panel of ``config`` together with a JSON-able manifest."""
    panels = [simulate_panel(config, i) for i in range(config.n_panels)]
    manifest = {
        "config": config.to_dict(),
        "panels": [
            {
                "panel_id": p.panel_id,
                "true_mic": ">MAX" if math.isinf(p.reference_mic) else p.reference_mic,
                "is_outlier": p.is_outlier,
                **p.params,
            }
            for p in panels
        ],
    }
    return panels, manifest
