"""Fit the linear phase-timing model on noisy synthetic measurements.

A phase's runtime is modeled as affine in the cumulative trip counts of its
loop nest.  We invent a depth-2 ground truth, measure it with 1% jitter,
fit, and score held-out points.

Run:  python3 demos/02_timing_fit.py
"""

import random

from cacheways.timing import (
    TrainingSample,
    fit_timing,
    make_features,
    predict_phase_time,
    timing_accuracy,
)

rng = random.Random(2024)
TRUE = (350.0, 4.2, 0.85)  # ns: setup + per-outer-trip + per-inner-element


def measure(u1, u2):
    feats = make_features((u1, u2))
    t = TRUE[0] + TRUE[1] * feats[0] + TRUE[2] * feats[1]
    return t * (1.0 + rng.uniform(-0.01, 0.01))


def draw(n):
    out = []
    for _ in range(n):
        u1, u2 = rng.randrange(10, 100), rng.randrange(10, 100)
        out.append(TrainingSample((float(u1), float(u2)), measure(u1, u2)))
    return out


model = fit_timing(draw(60))
print("true coefficients:   %s" % (TRUE,))
print("fitted coefficients: (%s)" % ", ".join("%.4g" % c for c in model.coefficients))
print("fit residual: %.4g" % model.fit_residual)
print("held-out accuracy: %.2f%%" % timing_accuracy(model, draw(30)))

bounds = (48.0, 67.0)
print(
    "\npredicted time for trip counts %s: %.1f ns (truth %.1f ns)"
    % (bounds, predict_phase_time(model, bounds), measure(*bounds))
)
