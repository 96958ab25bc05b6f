"""Linear phase-timing model.

A depth-n nest's execution time is modeled as

    T = c0 + c1*u1 + ... + cn*un,    u_i = U_1 * U_2 * ... * U_i,

where U_i are the loop trip counts.  The features u_i are cumulative bound
products; the coefficients come from a least-squares fit over training runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AccuracyUndefined, ArityError, FitSingular

RIDGE = 1e-12  # stabilizer on the normal equations, realized via augmentation


def make_features(bounds: Sequence[float]) -> tuple[float, ...]:
    """Cumulative products of the trip counts: (U1, U1*U2, ...)."""
    feats = []
    acc = 1.0
    for b in bounds:
        if b < 0:
            raise ArityError("negative trip count %r" % (b,))
        acc *= b
        feats.append(acc)
    return tuple(feats)


@dataclass(frozen=True)
class TimingModel:
    coefficients: tuple[float, ...]  # c0..cn
    fit_residual: float

    @property
    def depth(self) -> int:
        return len(self.coefficients) - 1


@dataclass(frozen=True)
class TrainingSample:
    bounds: tuple[float, ...]
    observed_time: float


def fit_timing(samples: Sequence[TrainingSample]) -> TimingModel:
    """Least-squares fit of the coefficients over the samples.

    Deterministic for a fixed sample order.  Raises FitSingular when the
    design matrix is rank-deficient (too few or affinely dependent samples).
    """
    if not samples:
        raise FitSingular("no training samples")
    depth = len(samples[0].bounds)
    rows = []
    y = []
    for s in samples:
        if len(s.bounds) != depth:
            raise ArityError(
                "sample arity %d != %d" % (len(s.bounds), depth)
            )
        rows.append((1.0,) + make_features(s.bounds))
        y.append(float(s.observed_time))
    x = np.array(rows, dtype=float)
    yv = np.array(y, dtype=float)
    ncoef = depth + 1
    if np.linalg.matrix_rank(x) < ncoef:
        raise FitSingular(
            "design matrix rank-deficient for %d coefficients" % ncoef
        )
    aug = np.vstack([x, np.sqrt(RIDGE) * np.eye(ncoef)])
    target = np.concatenate([yv, np.zeros(ncoef)])
    coef, *_ = np.linalg.lstsq(aug, target, rcond=None)
    resid = float(np.sqrt(np.mean((x @ coef - yv) ** 2)))
    return TimingModel(tuple(float(c) for c in coef), resid)


def predict_phase_time(model: TimingModel, bounds: Sequence[float]) -> float:
    """Evaluate the model at the given trip counts; clamps below at 0."""
    if len(bounds) != model.depth:
        raise ArityError(
            "got %d bounds for a depth-%d model" % (len(bounds), model.depth)
        )
    feats = make_features(bounds)
    val = model.coefficients[0]
    for c, u in zip(model.coefficients[1:], feats):
        val += c * u
    return max(0.0, val)


def timing_accuracy(model: TimingModel, test_samples: Sequence[TrainingSample]) -> float:
    """Mean relative accuracy in percent: mean of max(0, 1 - |pred-obs|/obs),
    skipping samples with observed time 0."""
    scores = []
    for s in test_samples:
        if s.observed_time == 0:
            continue
        pred = predict_phase_time(model, s.bounds)
        scores.append(max(0.0, 1.0 - abs(pred - s.observed_time) / s.observed_time))
    if not scores:
        raise AccuracyUndefined("every observed time is zero")
    return 100.0 * sum(scores) / len(scores)
