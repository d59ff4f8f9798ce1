"""
When is a panel ready to read?
==============================

The growth-control redox signal decides when enough incubation has happened.
The maximum smoothed control redox puts the panel into one of four states:

* ``Insufficient``: at most 0.07 so far
* ``Continue``: in (0.07, 0.2]
* ``Ready``: above 0.2, which fixes the time-to-result
* ``Failed``: never ready after 16 hours
"""

import numpy as np

from growthmic.pipeline import FeatureConfig, panel_status
from growthmic.readiness import assess_readiness
from growthmic.sim import SimulationConfig, logistic_curve, simulate_panel
from growthmic.smooth import loess_fit

t = np.arange(49) / 3.0
for asymptote, rate, inflection in [(0.8, 1.0, 4.0), (0.8, 0.5, 11.0), (0.15, 1.0, 5.0), (0.05, 1.0, 5.0)]:
    curve = loess_fit(t, logistic_curve(t, asymptote, rate, inflection))
    states = [type(assess_readiness(curve, e)).__name__ for e in (2.0, 6.0, 12.0, 16.0, 16.34)]
    print(f"asymptote {asymptote:<4} inflection {inflection:<4}:", " -> ".join(states))

# %%
# Online replay on a simulated panel
# ----------------------------------
# ``panel_status`` replays the incubation tick by tick and smooths only the
# readings already available, so the decision never uses future data.

config = SimulationConfig(noise_sd=0.03, seed=5)
for i in range(4):
    panel = simulate_panel(config, i)
    print(panel.panel_id, panel_status(panel, FeatureConfig()))
