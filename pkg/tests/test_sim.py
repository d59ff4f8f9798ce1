import math

import numpy as np
import pytest

from growthmic.sim import (
    ABOVE_GRID,
    FOX_DILUTIONS,
    PIP_DILUTIONS,
    TURBIDITY_MAX,
    SimulationConfig,
    logistic_curve,
    simulate_dataset,
    simulate_panel,
)


def noiseless(**kw):
    return SimulationConfig(**{"noise_sd": 0.0, "outlier_rate": 0.0, **kw})


def test_grids():
    assert FOX_DILUTIONS == (0.5, 1, 2, 4, 8, 16, 32)
    assert PIP_DILUTIONS[0] == 0.25 and PIP_DILUTIONS[-1] == 128 and len(PIP_DILUTIONS) == 10
    t = SimulationConfig().times
    assert len(t) == 49 and t[0] == 0 and t[-1] == pytest.approx(16.0)


def test_logistic_starts_at_zero_and_saturates():
    t = np.linspace(0, 40, 200)
    y = logistic_curve(t, 1.7, 0.9, 6.0)
    assert y[0] == 0.0
    assert y[-1] == pytest.approx(1.7, rel=1e-6)
    assert np.all(np.diff(y) > 0)


def test_growth_and_no_growth_wells():
    cfg = noiseless(n_panels=200, offscale_mic_rate=0.0)
    for i in range(200):
        p = simulate_panel(cfg, i)
        if p.reference_mic != 2.0:
            continue
        below = p.wells[FOX_DILUTIONS.index(1)]
        above = p.wells[FOX_DILUTIONS.index(4)]
        prm = p.params
        want = logistic_curve(p.times, prm["asymptote"], prm["growth_rate"], prm["inflection_time"])
        np.testing.assert_array_equal(below.turbidity, want)
        assert below.turbidity[-1] > 0.5 * prm["asymptote"]
        assert np.all(above.turbidity == 0) and np.all(above.redox == 0)
        return
    pytest.fail("no panel with MIC 2")


def test_deterministic_per_panel():
    cfg = SimulationConfig(n_panels=5, seed=9, outlier_rate=0.3)
    a, b = simulate_panel(cfg, 3), simulate_panel(cfg, 3)
    for wa, wb in zip(a.wells + (a.control,), b.wells + (b.control,)):
        assert np.array_equal(wa.turbidity, wb.turbidity) and np.array_equal(wa.redox, wb.redox)
    panels, _ = simulate_dataset(cfg)
    # Subsets reproduce: panel 3 alone equals panel 3 of the full run.
    assert np.array_equal(panels[3].wells[0].redox, a.wells[0].redox)
    other = simulate_panel(SimulationConfig(n_panels=5, seed=10), 3)
    assert not np.array_equal(other.control.redox, a.control.redox)


def test_dataset_pure_function():
    cfg = SimulationConfig(n_panels=4, seed=1)
    (p1, m1), (p2, m2) = simulate_dataset(cfg), simulate_dataset(cfg)
    assert m1 == m2
    assert all(np.array_equal(x.control.turbidity, y.control.turbidity) for x, y in zip(p1, p2))


def test_empty_dataset():
    panels, manifest = simulate_dataset(SimulationConfig(n_panels=0))
    assert panels == [] and manifest["panels"] == []
    assert manifest["config"]["n_panels"] == 0


def test_on_grid_when_no_offscale():
    _, manifest = simulate_dataset(SimulationConfig(n_panels=100, offscale_mic_rate=0.0))
    assert all(p["true_mic"] in FOX_DILUTIONS for p in manifest["panels"])


def test_offscale_token():
    panels, manifest = simulate_dataset(SimulationConfig(n_panels=50, offscale_mic_rate=1.0))
    assert all(math.isinf(p.reference_mic) for p in panels)
    assert all(m["true_mic"] == ">MAX" for m in manifest["panels"])
    assert ABOVE_GRID == math.inf


def test_outlier_fraction():
    cfg = SimulationConfig(n_panels=10000, outlier_rate=0.02, noise_sd=0.0)
    flags = [simulate_panel(cfg, i).is_outlier for i in range(cfg.n_panels)]
    assert 0.01 <= np.mean(flags) <= 0.03


def test_outlier_well_grows_above_mic():
    cfg = noiseless(n_panels=300, outlier_rate=1.0, offscale_mic_rate=0.0)
    seen = 0
    for i in range(cfg.n_panels):
        p = simulate_panel(cfg, i)
        grown = [w.turbidity.max() > 0 for w in p.wells]
        if p.is_outlier:
            seen += 1
            j = p.params["outlier_well"] - 1
            assert p.wells[j].dilution >= p.reference_mic and grown[j]
    assert seen == cfg.n_panels


@pytest.mark.parametrize("sd", [0.0, 0.05, 0.5, 3.0])
def test_signal_ranges(sd):
    panels, _ = simulate_dataset(SimulationConfig(n_panels=20, noise_sd=sd, seed=2))
    for p in panels:
        for w in p.wells + (p.control,):
            assert w.turbidity.min() >= 0 and w.turbidity.max() <= TURBIDITY_MAX
            assert w.redox.min() >= 0 and w.redox.max() <= 1


def test_noiseless_pattern_is_valid_sequence():
    cfg = noiseless(n_panels=300, dilutions=PIP_DILUTIONS, sub_mic_attenuation=0.5)
    for i in range(cfg.n_panels):
        p = simulate_panel(cfg, i)
        grown = np.array([w.turbidity.max() > 0 for w in p.wells], dtype=int)
        expect = (p.dilutions < p.reference_mic).astype(int)
        assert np.array_equal(grown, expect)
        assert p.control.turbidity.max() > 0


def test_attenuation_shrinks_sub_mic_wells():
    cfg = noiseless(n_panels=100, sub_mic_attenuation=0.8, offscale_mic_rate=0.0)
    for i in range(cfg.n_panels):
        p = simulate_panel(cfg, i)
        grown = [w.turbidity[-1] for w in p.wells if w.dilution < p.reference_mic]
        if len(grown) >= 2:
            assert all(a > b for a, b in zip(grown, grown[1:]))
            assert grown[0] < p.control.turbidity[-1]


@pytest.mark.parametrize(
    "kw",
    [
        {"n_panels": -1},
        {"dilutions": (2.0, 1.0)},
        {"noise_sd": -0.1},
        {"outlier_rate": 1.5},
        {"growth_rate_range": (1.0, 0.5)},
        {"sub_mic_attenuation": 1.0},
    ],
)
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        SimulationConfig(**kw)


def test_panel_index_range():
    with pytest.raises(IndexError):
        simulate_panel(SimulationConfig(n_panels=2), 2)
