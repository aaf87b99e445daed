"""Parametric membership-inference attack and its measurement harnesses.

Scores under each hypothesis are modelled as normal. The decision is the
most powerful test at level ``alpha_star`` between the two fitted normals:
with unequal variances the rejection region is a quadratic in the score,
calibrated through the one-degree-of-freedom noncentral chi-square; with
equal variances it is the usual one-sided z-test.

Hypothesis 0 is "z is not in the training data", so a decision of 1 under
H0 is a false positive (counted in ``x``) and a decision of 0 under H1 a
false negative (counted in ``y``).
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import stats
from .exceptions import DomainError, InsufficientDataError

VARIANCE_FLOOR = 1e-12
EQUAL_VAR_RTOL = 1e-9


@dataclasses.dataclass(frozen=True)
class NormalFit:
    mu: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.var)):
            raise DomainError("normal fit parameters must be finite")
        if self.var < VARIANCE_FLOOR:
            raise DomainError(f"variance {self.var} below floor {VARIANCE_FLOOR}")


def fit_normal(scores) -> NormalFit:
    """Sample mean and unbiased variance (floored at ``VARIANCE_FLOOR``)."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size < 2:
        raise InsufficientDataError(f"need at least 2 scores to fit, got {scores.size}")
    return NormalFit(float(scores.mean()), max(float(scores.var(ddof=1)), VARIANCE_FLOOR))


def _check_alpha_star(alpha_star) -> float:
    if not 0.0 < alpha_star < 1.0:
        raise DomainError(f"alpha_star must lie in (0, 1), got {alpha_star}")
    return float(alpha_star)


@dataclasses.dataclass(frozen=True)
class DecisionInputs:
    score: float
    fit0: NormalFit
    fit1: NormalFit
    alpha_star: float

    def __post_init__(self):
        _check_alpha_star(self.alpha_star)


def decide_many(scores, mu0, var0, mu1, var1, alpha_star):
    """Vectorised decision bits (1 = claim membership).

    All arguments broadcast against each other; ``alpha_star`` is a scalar.
    """
    alpha_star = _check_alpha_star(alpha_star)
    scores, mu0, var0, mu1, var1 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (scores, mu0, var0, mu1, var1))
    )
    out = np.zeros(scores.shape, dtype=np.int8)
    equal = np.abs(var0 - var1) <= EQUAL_VAR_RTOL * np.maximum(var0, var1)

    if equal.any():
        sd = np.sqrt(var0[equal])
        sign = np.where(mu1[equal] >= mu0[equal], 1.0, -1.0)
        z = sign * (scores[equal] - mu0[equal]) / sd
        out[equal] = z > stats.std_normal_inv_cdf(1.0 - alpha_star)

    quad = ~equal
    if quad.any():
        s0, v0, m0 = scores[quad], var0[quad], mu0[quad]
        v1, m1 = var1[quad], mu1[quad]
        # centre of the quadratic log-likelihood ratio
        centre = (m0 / v0 - m1 / v1) / (1.0 / v0 - 1.0 / v1)
        nc = (m0 - centre) ** 2 / v0
        dist = (s0 - centre) ** 2
        wider0 = v0 > v1
        res = np.empty(s0.shape, dtype=bool)
        if wider0.any():
            thr = v0[wider0] * stats.noncentral_chisq1_inv_cdf(alpha_star, nc[wider0])
            res[wider0] = dist[wider0] <= thr
        if (~wider0).any():
            thr = v0[~wider0] * stats.noncentral_chisq1_inv_cdf(1.0 - alpha_star, nc[~wider0])
            res[~wider0] = dist[~wider0] >= thr
        out[quad] = res
    return out


def decide(d: DecisionInputs) -> int:
    """Most powerful level-``alpha_star`` test of H0 (fit0) against H1 (fit1)."""
    return int(decide_many(d.score, d.fit0.mu, d.fit0.var, d.fit1.mu, d.fit1.var, d.alpha_star))


def achieved_type1(fit0: NormalFit, fit1: NormalFit, alpha_star: float, trials: int, rng) -> float:
    """Monte-Carlo rate of decision 1 for scores drawn exactly from ``fit0``."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    scores = stats.normal_draw(rng, fit0.mu, fit0.var, size=int(trials))
    return float(decide_many(scores, fit0.mu, fit0.var, fit1.mu, fit1.var, alpha_star).mean())


# --------------------------------------------------------------------------
# Measurement
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class MeasurementResult:
    """Error counts of one attack, with the per-trial log.

    ``hypothesis``, ``score`` and ``decision`` are parallel arrays with one
    entry per challenge, H0 trials first.
    """

    x: int
    y: int
    n0: int
    n1: int
    hypothesis: np.ndarray
    score: np.ndarray
    decision: np.ndarray

    @property
    def rates(self):
        return self.x / self.n0, self.y / self.n1


def _result(scores0, scores1, d0, d1) -> MeasurementResult:
    d0 = np.asarray(d0, dtype=np.int8)
    d1 = np.asarray(d1, dtype=np.int8)
    return MeasurementResult(
        x=int(d0.sum()),
        y=int((1 - d1).sum()),
        n0=len(d0),
        n1=len(d1),
        hypothesis=np.concatenate([np.zeros(len(d0), np.int8), np.ones(len(d1), np.int8)]),
        score=np.concatenate([scores0, scores1]).astype(float),
        decision=np.concatenate([d0, d1]),
    )


def _scores(mech, base, hypothesis, rng, size):
    outputs = mech.draw(base.dataset(hypothesis), rng, size)
    return np.asarray(mech.score(base.z, outputs), dtype=float)


def measure_mia(mech, base, n0: int, n1: int, m0: int, m1: int, alpha_star: float, rng) -> MeasurementResult:
    """Independent repetitions: every trial gets its own fresh shadow sets.

    Mechanism draws total ``(n0 + n1) * (m0 + m1) + n0 + n1``. Draw order
    is fixed (for each H0 trial: target, H0 shadows, H1 shadows; then the
    same for H1 trials), so a seed determines the result.
    """
    alpha_star = _check_alpha_star(alpha_star)
    if m0 < 2 or m1 < 2:
        raise InsufficientDataError("shadow set sizes m0, m1 must be >= 2")
    if n0 < 1 or n1 < 1:
        raise DomainError("challenge counts must be >= 1")
    gen = stats.as_generator(rng)
    targets = {0: np.empty(n0), 1: np.empty(n1)}
    fits = {0: np.empty((n0, 4)), 1: np.empty((n1, 4))}
    for h, count in ((0, n0), (1, n1)):
        for t in range(count):
            targets[h][t] = _scores(mech, base, h, gen, 1)[0]
            f0 = fit_normal(_scores(mech, base, 0, gen, m0))
            f1 = fit_normal(_scores(mech, base, 1, gen, m1))
            fits[h][t] = (f0.mu, f0.var, f1.mu, f1.var)
    d = {
        h: decide_many(targets[h], *fits[h].T, alpha_star)
        for h in (0, 1)
    }
    return _result(targets[0], targets[1], d[0], d[1])


def _loo_fits(scores):
    """Leave-one-out mean and unbiased variance for each element."""
    n = scores.size
    m = scores.mean()
    ss = np.sum((scores - m) ** 2)
    mu = (n * m - scores) / (n - 1)
    # sum over the others of (x - mu_j)^2, expanded about the full mean
    ss_j = ss + n * (m - mu) ** 2 - (scores - mu) ** 2
    var = np.maximum(ss_j / (n - 2), VARIANCE_FLOOR)
    return mu, var


def _fast_decisions(s0, s1, alpha_star):
    f0, f1 = fit_normal(s0), fit_normal(s1)
    mu0_loo, var0_loo = _loo_fits(s0)
    mu1_loo, var1_loo = _loo_fits(s1)
    d0 = decide_many(s0, mu0_loo, var0_loo, f1.mu, f1.var, alpha_star)
    d1 = decide_many(s1, f0.mu, f0.var, mu1_loo, var1_loo, alpha_star)
    return d0, d1


def _fast_scores(mech, base, n, rng):
    if n < 3:
        raise InsufficientDataError("cross-fed measurement needs n >= 3")
    gen = stats.as_generator(rng)
    s0 = _scores(mech, base, 0, gen, n)
    s1 = _scores(mech, base, 1, gen, n)
    return s0, s1


def measure_mia_fast(mech, base, n: int, alpha_star: float, rng) -> MeasurementResult:
    """Cross-fed measurement from ``2n`` mechanism draws.

    Each target is attacked with the remaining same-hypothesis scores and
    all opposite-hypothesis scores as its shadow pool.
    """
    alpha_star = _check_alpha_star(alpha_star)
    s0, s1 = _fast_scores(mech, base, n, rng)
    d0, d1 = _fast_decisions(s0, s1, alpha_star)
    return _result(s0, s1, d0, d1)


def roc_sweep(mech, base, n: int, alpha_grid, rng):
    """Cross-fed measurement over a grid of levels, sharing one draw set."""
    alpha_grid = [_check_alpha_star(a) for a in alpha_grid]
    s0, s1 = _fast_scores(mech, base, n, rng)
    out = []
    for a in alpha_grid:
        d0, d1 = _fast_decisions(s0, s1, a)
        out.append((a, _result(s0, s1, d0, d1)))
    return out


class NormalLRTAttack(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around the normal likelihood-ratio attack.

    ``fit`` takes shadow scores with labels 0 (non-member) and 1 (member);
    ``predict`` returns the decision bit for each target score.

    Parameters
    ----------
    alpha_star : float, default 0.1
        Target type-I error of the test.
    """

    def __init__(self, alpha_star: float = 0.1):
        self.alpha_star = alpha_star

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float).reshape(-1, 1), y)
        _check_alpha_star(self.alpha_star)
        labels = np.unique(y)
        if not set(labels.tolist()) <= {0, 1}:
            raise DomainError("labels must be 0 (non-member) or 1 (member)")
        self.fit0_ = fit_normal(X[y == 0, 0])
        self.fit1_ = fit_normal(X[y == 1, 0])
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X):
        check_is_fitted(self, ("fit0_", "fit1_"))
        X = check_array(np.asarray(X, dtype=float).reshape(-1, 1))
        return decide_many(
            X[:, 0], self.fit0_.mu, self.fit0_.var, self.fit1_.mu, self.fit1_.var, self.alpha_star
        ).astype(int)
