"""Estimate a conditional variance by aggregating twelve learners.

Stage one fits forests, kNN, lasso, ridge, a tree and an elastic net to
the responses and aggregates them on a second sample.  Stage two fits
the same twelve learners to the squared residuals of that aggregate and
aggregates again.  Model selection (MS) keeps the single best learner
per stage, convex aggregation (C) mixes them with simplex weights.
"""

import numpy as np

from hetvar import (empirical_l2_error, fit_variance_pair, generate, machine_names,
                    best_candidate_oracle, stream)

model = "m1a1"
dn = generate(model, 1000, stream(10))   # fits the dictionaries
dN = generate(model, 1000, stream(11))   # scores and weights them
dT = generate(model, 1000, stream(12))   # measures the error against the truth

ms, c = fit_variance_pair(dn, dN, rng=stream(13))
names = machine_names()

print("MS picked", names[ms.f_selector], "for the mean and",
      names[ms.var_selector], "for the variance")
print("C weights on the variance learners:")
for name, w in zip(names, c.var_selector):
    if w > 1e-6:
        print(f"  {name:12s} {w:.3f}")

print(f"\nL2 error of the variance estimate: C {empirical_l2_error(c, model, dT):.4f}, "
      f"MS {empirical_l2_error(ms, model, dT):.4f}")

# The best pair in hindsight peeks at the true variance; it is a benchmark,
# not an estimator, and takes a while because it fits 13 dictionaries.
best = best_candidate_oracle(dn.concat(dN), model, dT, rng=stream(14))
print(f"best single (mean, variance) pair: {names[best.f_index]} + "
      f"{names[best.var_index]}, error {best.error:.4f}")

x = np.array([[0.2, 0.5, 0.9], [0.9, 0.1, 0.1]])
print("\nvariance estimates at two points:", np.round(c.predict_variance(x), 3))
