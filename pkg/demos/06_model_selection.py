"""
Choosing features with BIC
==========================

Stage one scores every subset of linear terms (or searches stepwise when
there are too many candidates).  Stage two keeps the winning features and
searches their polynomial degrees.  BIC scores convert to posterior model
probabilities.
"""

import numpy as np

from growthmic.select import TrainingSet, bic_posterior, train_growth_model

print("equal models:", bic_posterior([(-50, 4), (-50, 4)], 100))
print("(-100, d=3) vs (-98, d=5), n=1000:", np.round(bic_posterior([(-100, 3), (-98, 5)], 1000), 4))

# %%
# Recovering the true features
# ----------------------------
# Labels depend on ``x3`` and ``x7`` only; eight distractors are added.
# The selected model should contain both true features.

rng = np.random.default_rng(1)
X = rng.normal(size=(2000, 10))
y = (rng.random(2000) < 1 / (1 + np.exp(-(0.2 + X[:, 3] - 0.8 * X[:, 7])))).astype(int)
data = TrainingSet({f"x{i}": X[:, i] for i in range(10)}, y)
model = train_growth_model(data, list(data.columns))

print("stage 1 visited", model.stage1.n_models, "models; top three:")
for m in model.stage1.ranked[:3]:
    print(f"  {m.features}  BIC {m.bic:.1f}  posterior {m.posterior:.3f}")
print("final terms:", model.basis.terms)
