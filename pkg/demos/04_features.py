"""
Well features relative to the growth control
============================================

Each test well yields 24 numbers: for turbidity (``T``) and redox (``R``),
levels, slopes, curvature, integrals, ratios to the control and timing
offsets, all measured up to the time-to-result.
"""

import math

from growthmic.features import FEATURE_NAMES, label_growth
from growthmic.pipeline import extract_panel
from growthmic.sim import SimulationConfig, simulate_panel

panel = simulate_panel(SimulationConfig(noise_sd=0.03, sub_mic_attenuation=0.9, seed=2), 0)
pf = extract_panel(panel)
print(pf.panel_id, pf.status, "reference MIC", panel.reference_mic)

shown = ("T.AB.M", "T.AB.M.R", "R.IN.R", "T.FD.T")
print("dilution  grows  " + "  ".join(f"{n:>9}" for n in shown))
for d, fv in zip(pf.dilutions, pf.features):
    print(f"{d:8g}  {label_growth(d, panel.reference_mic):5d}  " + "  ".join(f"{fv[n]:9.3f}" for n in shown))

# %%
# The full feature set:
print(len(FEATURE_NAMES), "features:", ", ".join(FEATURE_NAMES))
print("above-grid reference grows everywhere:", label_growth(64.0, math.inf))
