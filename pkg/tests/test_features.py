import dataclasses
import math

import numpy as np
import pytest

from growthmic.features import (
    FEATURE_NAMES,
    DegenerateControlError,
    FeatureVector,
    LabeledWell,
    extract_features,
    label_growth,
)
from growthmic.pipeline import FeatureConfig, extract_panel
from growthmic.sim import SimulationConfig, Well, logistic_curve, simulate_panel
from growthmic.smooth import loess_fit

T = np.arange(49) / 3.0
RATIOS = [f"{s}.{r}" for s in "TR" for r in ("AB.M.R", "FD.M.R", "SD.M.R", "IN.R")]
OFFSETS = [f"{s}.{r}" for s in "TR" for r in ("FD.T", "SD.T")]
SCALED = ["T.FD", "T.SD", "T.IN", "T.AB.M", "T.FD.M", "T.SD.M"]


def curve(values):
    return loess_fit(T, values)


@pytest.fixture
def ctrl():
    return curve(logistic_curve(T, 1.6, 0.9, 6.0)), curve(logistic_curve(T, 0.8, 0.9, 6.0))


def test_names():
    assert len(FEATURE_NAMES) == 24 and len(set(FEATURE_NAMES)) == 24
    assert FEATURE_NAMES[:3] == ("T.FD", "T.SD", "T.IN")
    assert FEATURE_NAMES[12] == "R.FD" and FEATURE_NAMES[-1] == "R.SD.T"


def test_self_comparison(ctrl):
    f = extract_features(*ctrl, *ctrl, t_result=9.0)
    # T.IN.R as printed divides an integral by a level, so it is not a self-ratio.
    for name in ("T.AB.M.R", "T.FD.M.R", "T.SD.M.R", "R.AB.M.R", "R.FD.M.R", "R.SD.M.R"):
        assert f[name] == pytest.approx(1.0, abs=1e-12)
    for name in OFFSETS:
        assert f[name] == 0.0
    g = extract_features(*ctrl, *ctrl, t_result=9.0, in_ratio="integral")
    assert g["T.IN.R"] == pytest.approx(1.0) and g["R.IN.R"] == pytest.approx(1.0)
    assert f["T.IN.R"] == pytest.approx(f["T.IN"] / f["T.AB.M"])


def test_flat_zero_test_well(ctrl):
    zero = curve(np.zeros_like(T))
    f = extract_features(zero, zero, *ctrl, t_result=8.0)
    assert f["T.IN"] == 0 and f["T.AB.M"] == 0 and f["T.FD"] == 0
    assert f["T.AB.M.R"] == 0


def test_linear_integral():
    lin = curve(T.copy())
    f = extract_features(lin, lin, lin, lin, t_result=8.0)
    assert f["T.IN"] == pytest.approx(32.0, abs=1e-9)
    assert f["T.FD"] == pytest.approx(1.0, abs=1e-9)
    assert f["T.AB.M"] == pytest.approx(8.0, abs=1e-9)


def test_off_grid_t_result_appended():
    lin = curve(T.copy())
    f = extract_features(lin, lin, lin, lin, t_result=7.5)
    assert f["T.IN"] == pytest.approx(7.5**2 / 2, abs=1e-9)


def test_instantaneous_features_are_curve_derivatives(ctrl):
    tt = curve(logistic_curve(T, 1.0, 0.7, 7.0))
    tr = curve(logistic_curve(T, 0.5, 0.7, 7.0))
    f = extract_features(tt, tr, *ctrl, t_result=8.0)
    d = tt.derivatives(8.0)[0]
    assert f["T.FD"] == d[1] and f["T.SD"] == d[2]
    assert f["R.FD"] == tr.derivatives(8.0)[0, 1]


@pytest.mark.parametrize("c", [0.25, 3.0])
def test_scale_covariance(ctrl, c):
    raw_t = logistic_curve(T, 1.0, 0.7, 7.0)
    raw_c = logistic_curve(T, 1.6, 0.9, 6.0)
    tr = curve(logistic_curve(T, 0.5, 0.7, 7.0))
    base = extract_features(curve(raw_t), tr, curve(raw_c), ctrl[1], 9.0)
    sc = extract_features(curve(c * raw_t), tr, curve(c * raw_c), ctrl[1], 9.0)
    for name in SCALED:
        assert sc[name] == pytest.approx(c * base[name], rel=1e-9, abs=1e-12)
    for name in ("T.AB.M.R", "T.FD.M.R", "T.SD.M.R", "T.IN.R", "T.FD.T", "T.SD.T"):
        assert sc[name] == pytest.approx(base[name], rel=1e-9, abs=1e-12)
    for name in FEATURE_NAMES[12:]:
        assert sc[name] == base[name]


def test_time_offsets(ctrl):
    late = curve(logistic_curve(T, 1.6, 0.9, 8.0))
    f = extract_features(late, ctrl[1], *ctrl, t_result=14.0)
    assert f["T.FD.T"] > 1.0
    assert f["T.FD.T"] in np.round(np.arange(-42, 43) / 3.0, 12) or abs(f["T.FD.T"] * 3 - round(f["T.FD.T"] * 3)) < 1e-9


def test_degenerate_control(ctrl):
    zero = curve(np.zeros_like(T))
    with pytest.raises(DegenerateControlError):
        extract_features(*ctrl, zero, ctrl[1], t_result=8.0)
    with pytest.raises(DegenerateControlError):
        extract_features(*ctrl, ctrl[0], zero, t_result=8.0)


def test_t_result_outside_domain(ctrl):
    with pytest.raises(ValueError):
        extract_features(*ctrl, *ctrl, t_result=16.5)
    with pytest.raises(ValueError):
        extract_features(*ctrl, *ctrl, t_result=8.0, in_ratio="bogus")


def test_vector_mapping(ctrl):
    f = extract_features(*ctrl, *ctrl, t_result=9.0)
    assert list(f) == list(FEATURE_NAMES) and len(f) == 24
    assert all(math.isfinite(v) for v in f.values)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    assert np.array_equal(FeatureVector.from_mapping(dict(f)).values, f.values)
    with pytest.raises(KeyError):
        f["nope"]


def test_labels():
    assert label_growth(1, 2) == 1
    assert label_growth(2, 2) == 0
    assert label_growth(128, 4) == 0
    assert label_growth(128, math.inf) == 1
    with pytest.raises(ValueError):
        LabeledWell("P", 1.0, None, 2)


def test_labels_non_increasing_per_panel():
    cfg = SimulationConfig(n_panels=200, seed=4, offscale_mic_rate=0.2)
    for i in range(cfg.n_panels):
        p = simulate_panel(cfg, i)
        y = [label_growth(d, p.reference_mic) for d in p.dilutions]
        assert all(a >= b for a, b in zip(y, y[1:]))


def test_features_ignore_samples_after_t_result():
    cfg = SimulationConfig(n_panels=3, seed=5, noise_sd=0.03)
    p = simulate_panel(cfg, 0)
    a = extract_panel(p)
    assert a.ready
    cut = a.t_result

    def scramble(w):
        late = p.times > cut
        return Well(w.dilution, np.where(late, 2.0, w.turbidity), np.where(late, 0.01, w.redox))

    # Redox after t_result stays above 0.2 on the control so readiness is unchanged.
    ctrl = p.control
    ctrl2 = Well(0.0, np.where(p.times > cut, 2.0, ctrl.turbidity), np.where(p.times > cut, 0.9, ctrl.redox))
    q = dataclasses.replace(p, wells=tuple(scramble(w) for w in p.wells), control=ctrl2)
    b = extract_panel(q)
    assert b.t_result == cut
    for fa, fb in zip(a.features, b.features):
        assert np.array_equal(fa.values, fb.values)


def test_extract_panel_in_ratio_switch():
    p = simulate_panel(SimulationConfig(n_panels=1, seed=2), 0)
    a = extract_panel(p, FeatureConfig(in_ratio="as_printed"))
    b = extract_panel(p, FeatureConfig(in_ratio="integral"))
    assert a.features[0]["T.IN"] == b.features[0]["T.IN"]
    assert a.features[0]["T.IN.R"] != b.features[0]["T.IN.R"]
