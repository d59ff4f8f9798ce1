"""
From per-well growth probabilities to an MIC distribution
==========================================================

A model predicts, for each dilution of a panel, the probability that the
organism still grows there.  Only monotone patterns (grow, grow, ..., no
growth, no growth) are physically valid, so the MIC distribution puts mass
on the position of the growth/no-growth boundary, renormalised over valid
patterns.
"""

import numpy as np

from growthmic.mic import LossWeights, call_mic, dt_mic, expected_losses, mic_distribution, modal_mic

# Three dilutions, growth becoming less likely as the drug concentration rises.
dist = mic_distribution([0.9, 0.6, 0.2], dilutions=[1, 2, 4])
print("rho over bins 1..4:", np.round(dist.rho, 4))
print("probability the raw pattern is valid:", round(dist.valid_sequence_prob, 4))

# Bin j means "MIC is the j-th dilution"; bin 4 is above the grid.

# %%
# Modal versus decision-theoretic estimates
# -----------------------------------------
# The modal call takes the most likely bin.  The decision-theoretic call
# minimises an expected loss that penalises underestimation (w1) more than
# overestimation (w2).

wide = mic_distribution([0.97, 0.9, 0.7, 0.5, 0.35, 0.1])
print("wider panel rho:", np.round(wide.rho, 3), "modal bin:", modal_mic(wide))
for w1 in (1, 5, 20):
    w = LossWeights(w1=w1, w2=1, w3=0)
    print(f"w1={w1:>2}: losses {np.round(expected_losses(wide, w), 3)} -> DT bin {dt_mic(wide, w)}")

# %%
# Calling or delaying
# -------------------
# A call is issued when the estimate plus or minus one dilution holds at
# least 90% of the mass; otherwise the result is delayed.

print(call_mic(dist))
print(call_mic(mic_distribution([0.5] * 7)))
