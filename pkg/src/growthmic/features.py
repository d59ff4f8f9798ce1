"""Growth-curve features of a test well relative to its growth control.

Twelve features per signal (turbidity ``T``, redox ``R``):

==========  ==========================================================
``X.FD``    first derivative of the test well at the time-to-result
``X.SD``    second derivative of the test well at the time-to-result
``X.IN``    integral of the test well over [0, time-to-result]
``X.AB.M``  maximum absolute level of the test well
``X.FD.M``  maximum first derivative of the test well
``X.SD.M``  maximum second derivative of the test well
``X.AB.M.R`` ``X.AB.M`` of test over ``X.AB.M`` of control
``X.FD.M.R`` ``X.FD.M`` of test over ``X.FD.M`` of control
``X.SD.M.R`` ``X.SD.M`` of test over ``X.SD.M`` of control
``X.IN.R``  ``X.IN`` of test over ``X.AB.M`` of control (see ``in_ratio``)
``X.FD.T``  time of max first derivative, test minus control
``X.SD.T``  time of max second derivative, test minus control
==========  ==========================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Mapping

import numpy as np

from .smooth import SmoothedCurve

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "LabeledWell",
    "extract_features",
    "label_growth",
    "DegenerateControlError",
]

_SUFFIXES = (
    "FD", "SD", "IN", "AB.M", "FD.M", "SD.M",
    "AB.M.R", "FD.M.R", "SD.M.R", "IN.R", "FD.T", "SD.T",
)  # fmt: skip
FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{sig}.{s}" for sig in ("T", "R") for s in _SUFFIXES
)
_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

_GUARD = 1e-9


class DegenerateControlError(ValueError):
    """The control well has no signal, so ratio features are undefined."""


class FeatureVector(Mapping[str, float]):
    """The 24 features of one test well, addressable by name."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.array(values, dtype=float)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite feature value")
        values.flags.writeable = False
        self.values = values

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "FeatureVector":
        return cls([mapping[name] for name in FEATURE_NAMES])

    def __getitem__(self, name: str) -> float:
        return float(self.values[_INDEX[name]])

    def __iter__(self) -> Iterator[str]:
        return iter(FEATURE_NAMES)

    def __len__(self) -> int:
        return len(FEATURE_NAMES)

    def __eq__(self, other):
        if isinstance(other, FeatureVector):
            return bool(np.array_equal(self.values, other.values))
        return NotImplemented

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        inner = ", ".join(f"{k}={v:.4g}" for k, v in self.items())
        return f"FeatureVector({inner})"


@dataclass(frozen=True)
class LabeledWell:
    panel_id: str
    dilution: float
    features: FeatureVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass(frozen=True)
class _Profile:
    value: float
    d1: float
    d2: float
    integral: float
    ab_max: float
    fd_max: float
    sd_max: float
    t_fd_max: float
    t_sd_max: float


def _grid(curve: SmoothedCurve, t_result: float) -> np.ndarray:
    lo, hi = curve.domain
    if not lo <= t_result <= hi:
        raise ValueError(f"t_result {t_result} outside curve domain [{lo}, {hi}]")
    grid = curve.t[curve.t <= t_result]
    if grid[-1] < t_result:
        grid = np.append(grid, t_result)
    return grid


def _profile(curve: SmoothedCurve, t_result: float) -> _Profile:
    grid = _grid(curve, t_result)
    d = curve.derivatives(grid)
    v, d1, d2 = d[:, 0], d[:, 1], d[:, 2]
    i1, i2 = int(np.argmax(d1)), int(np.argmax(d2))
    integral = float(np.trapezoid(v, grid)) if len(grid) > 1 else 0.0
    return _Profile(
        value=float(v[-1]),
        d1=float(d1[-1]),
        d2=float(d2[-1]),
        integral=integral,
        ab_max=float(np.max(np.abs(v))),
        fd_max=float(d1[i1]),
        sd_max=float(d2[i2]),
        t_fd_max=float(grid[i1]),
        t_sd_max=float(grid[i2]),
    )


def _ratio(num: float, den: float) -> float:
    return num / max(abs(den), _GUARD)


def _signal_features(test: _Profile, ctrl: _Profile, in_ratio: str, label: str) -> list:
    if abs(ctrl.ab_max) < _GUARD:
        raise DegenerateControlError(f"{label} control signal is identically zero")
    in_den = ctrl.ab_max if in_ratio == "as_printed" else ctrl.integral
    return [
        test.d1,
        test.d2,
        test.integral,
        test.ab_max,
        test.fd_max,
        test.sd_max,
        _ratio(test.ab_max, ctrl.ab_max),
        _ratio(test.fd_max, ctrl.fd_max),
        _ratio(test.sd_max, ctrl.sd_max),
        _ratio(test.integral, in_den),
        test.t_fd_max - ctrl.t_fd_max,
        test.t_sd_max - ctrl.t_sd_max,
    ]


def extract_features(
    test_turb: SmoothedCurve,
    test_redox: SmoothedCurve,
    control_turb: SmoothedCurve,
    control_redox: SmoothedCurve,
    t_result: float,
    in_ratio: Literal["as_printed", "integral"] = "as_printed",
) -> FeatureVector:
    """Compute the 24 features of a test well at the time-to-result.

    Maxima, their times and the trapezoid integral are taken over each
    curve's sample grid restricted to ``[0, t_result]`` (with ``t_result``
    appended when it falls between samples).

    ``in_ratio="as_printed"`` divides the test integral by the control's
    maximum level; ``"integral"`` divides by the control integral instead.

    Raises
    ------
    ValueError
        ``t_result`` outside a curve domain.
    DegenerateControlError
        A control signal is identically zero.
    """
    if in_ratio not in ("as_printed", "integral"):
        raise ValueError(f"unknown in_ratio mode {in_ratio!r}")
    turb = _signal_features(
        _profile(test_turb, t_result), _profile(control_turb, t_result), in_ratio, "turbidity"
    )
    red = _signal_features(
        _profile(test_redox, t_result), _profile(control_redox, t_result), in_ratio, "redox"
    )
    return FeatureVector(turb + red)


def label_growth(dilution: float, reference_mic: float) -> int:
    """1 when the well's dilution is below the reference MIC, else 0.

    An above-grid reference (``math.inf``) labels every well as growth.
    """
    return int(dilution < reference_mic)
