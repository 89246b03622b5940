"""Abstain where the noise is largest.

A predictor with reject option declines to predict at the fraction
epsilon of inputs whose estimated variance is highest.  The threshold
comes from an empirical CDF of the estimated variance on 100 unlabeled
points; a tiny uniform jitter breaks ties so any epsilon is reachable.
"""

from hetvar import (calibrate_cdf, draw_features, evaluate_reject, fit_variance, generate,
                    oracle_predictor, RejectPredictor, stream)

model = "m1a1"
x_calib = draw_features(model, 100, stream(20))
test = generate(model, 1000, stream(21))

# The oracle knows the true mean and variance: its error shrinks as it rejects more.
oracle = oracle_predictor(model, x_calib, rng=stream(22))

# The plug-in rule uses the convex aggregate for both the mean and the variance.
pipe = fit_variance("C", generate(model, 1000, stream(23)), generate(model, 1000, stream(24)),
                    rng=stream(25))
r = stream(26)
plugin = RejectPredictor(pipe.predict_mean, pipe.predict_variance,
                         calibrate_cdf(pipe.predict_variance, x_calib, rng=r), rng=r)

print("eps   oracle err / rate    plug-in C err / rate")
for eps in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9):
    o = evaluate_reject(oracle, test, eps)
    p = evaluate_reject(plugin, test, eps)
    print(f"{eps:.1f}   {o.err:.3f} / {o.rate:.3f}        {p.err:.3f} / {p.rate:.3f}")
