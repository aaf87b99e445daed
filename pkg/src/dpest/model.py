"""Joint probability model for privacy, attack strength and error counts.

Two observation models are supported:

``"independent"``
    ``X ~ Binom(n0, alpha)`` and ``Y ~ Binom(n1, beta)`` independently, for
    counts produced by fully independent attack repetitions.
``"bivariate"``
    A bivariate normal approximation with within-hypothesis correlation
    ``tau`` and cross-hypothesis correlation ``rho`` shared by all challenge
    bases, for counts produced by cross-fed (shadow-sharing) measurement.
"""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np

from . import region, stats
from .exceptions import DegenerateRegionError, DomainError, ShapeError

INDEPENDENT = "independent"
BIVARIATE = "bivariate"
MODES = (INDEPENDENT, BIVARIATE)

VARIANCE_FLOOR = 1e-8


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclasses.dataclass(frozen=True)
class ChallengeObservation:
    """Error counts of one attack on one challenge base."""

    id: str
    n0: int
    n1: int
    x: int
    y: int

    def __post_init__(self):
        for name in ("n0", "n1", "x", "y"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise DomainError(f"{name} must be an integer count, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.n0 < 1 or self.n1 < 1:
            raise DomainError("challenge counts n0, n1 must be >= 1")
        if not 0 <= self.x <= self.n0:
            raise DomainError(f"x={self.x} must lie in [0, n0={self.n0}]")
        if not 0 <= self.y <= self.n1:
            raise DomainError(f"y={self.y} must lie in [0, n1={self.n1}]")

    @property
    def rates(self) -> region.ErrorPoint:
        return region.ErrorPoint(self.x / self.n0, self.y / self.n1)


@dataclasses.dataclass(frozen=True)
class HyperParams:
    """Prior hyperparameters and the fixed DP delta.

    ``sigma_rho_sq`` is accepted for configuration compatibility but has no
    effect: rho is uniform given tau.
    """

    delta: float
    sigma_eps_sq: float = 10.0
    beta_a: float = 1.0
    beta_b: float = 1.0
    sigma_tau_sq: float = 1e-4
    sigma_rho_sq: float = 1e-2

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")
        for name in ("sigma_eps_sq", "beta_a", "beta_b", "sigma_tau_sq", "sigma_rho_sq"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")


def taurho_feasible(tau: float, rho: float, n: int) -> bool:
    if n < 2:
        return False
    if not (-1.0 / (n - 1) < tau <= 1.0):
        return False
    return abs(rho) <= (1.0 + (n - 1) * tau) / n


@dataclasses.dataclass(frozen=True)
class CorrelationParams:
    tau: float
    rho: float
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if not taurho_feasible(self.tau, self.rho, self.n):
            raise DomainError(
                f"(tau={self.tau}, rho={self.rho}) violates -1/(n-1) < tau <= 1, "
                f"|rho| <= (1 + (n-1) tau)/n for n={self.n}"
            )


def common_n(observations: Sequence[ChallengeObservation]) -> int:
    """The shared challenge count required by the bivariate model."""
    ns = {(o.n0, o.n1) for o in observations}
    if any(a != b for a, b in ns) or len(ns) > 1:
        raise ShapeError("bivariate mode requires n0 = n1 = N, identical for all records")
    return next(iter(ns))[0] if ns else 0


# --------------------------------------------------------------------------
# Observation likelihoods
# --------------------------------------------------------------------------

def log_g_independent(obs: ChallengeObservation, alpha, beta):
    return stats.log_binomial_pmf(obs.x, obs.n0, alpha) + stats.log_binomial_pmf(
        obs.y, obs.n1, beta
    )


def bivariate_moments(n: int, alpha, beta, tau: float, rho: float):
    """Mean and covariance entries of the normal approximation to (X, Y)."""
    va = np.maximum(np.asarray(alpha, dtype=float) * (1 - np.asarray(alpha)), VARIANCE_FLOOR)
    vb = np.maximum(np.asarray(beta, dtype=float) * (1 - np.asarray(beta)), VARIANCE_FLOOR)
    inflate = n + n * (n - 1) * tau
    var_x = va * inflate
    var_y = vb * inflate
    cov = n * n * rho * np.sqrt(va * vb)
    return n * np.asarray(alpha, dtype=float), n * np.asarray(beta, dtype=float), var_x, var_y, cov


def log_g_bivariate(obs: ChallengeObservation, alpha, beta, corr: CorrelationParams):
    """Bivariate normal log density of ``(x, y)``; -inf where not positive definite."""
    if obs.n0 != obs.n1 or obs.n0 != corr.n:
        raise ShapeError(
            f"bivariate likelihood needs n0 = n1 = N={corr.n}, got n0={obs.n0}, n1={obs.n1}"
        )
    mx, my, vx, vy, c = bivariate_moments(corr.n, alpha, beta, corr.tau, corr.rho)
    det = vx * vy - c * c
    ok = (vx > 0) & (det > 0)
    safe_det = np.where(ok, det, 1.0)
    dx = obs.x - mx
    dy = obs.y - my
    quad = (vy * dx * dx - 2 * c * dx * dy + vx * dy * dy) / safe_det
    out = -math.log(2 * math.pi) - 0.5 * np.log(safe_det) - 0.5 * quad
    out = np.where(ok, out, -np.inf)
    return out.item() if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Priors
# --------------------------------------------------------------------------

def log_prior_eps(eps, hp: HyperParams):
    return stats.log_truncnormal_pdf(eps, 0.0, np.inf, 0.0, hp.sigma_eps_sq)


def log_prior_s(s, hp: HyperParams):
    s = np.asarray(s, dtype=float)
    out = np.where((s > 0) & (s < 1), stats.beta_log_pdf(np.clip(s, 0, 1), hp.beta_a, hp.beta_b), -np.inf)
    return out.item() if out.ndim == 0 else out


def log_prior_taurho(tau: float, rho: float, n: int, hp: HyperParams) -> float:
    """Truncated-normal prior on tau times a uniform prior on rho given tau."""
    if not taurho_feasible(tau, rho, n) or tau >= 1.0:
        return -math.inf
    lp_tau = stats.log_truncnormal_pdf(tau, -1.0 / (n - 1), 1.0, 0.0, hp.sigma_tau_sq)
    return lp_tau + math.log(n / (2.0 * (1.0 + (n - 1) * tau)))


# --------------------------------------------------------------------------
# Weights and the joint density
# --------------------------------------------------------------------------

def log_weight(obs, alpha, beta, eps, s, hp: HyperParams, mode=INDEPENDENT, corr=None):
    """Log of (shell density) x (observation likelihood) at latent error rates."""
    check_mode(mode)
    log_p = region.shell_log_density(alpha, beta, eps, hp.delta, s)
    if mode == INDEPENDENT:
        log_g = log_g_independent(obs, alpha, beta)
    else:
        if corr is None:
            raise DomainError("bivariate mode requires CorrelationParams")
        log_g = log_g_bivariate(obs, alpha, beta, corr)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(log_p), -np.inf, log_p + log_g)
    return out.item() if out.ndim == 0 else out


def log_joint(eps, s, alpha, beta, observations, hp: HyperParams, mode=INDEPENDENT, corr=None):
    """Unnormalised log posterior of (eps, s[, tau, rho], latents) given counts."""
    check_mode(mode)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    observations = list(observations)
    if not len(alpha) == len(beta) == len(observations):
        if not (len(observations) == 0 and alpha.size <= 1 and beta.size <= 1):
            raise ShapeError(
                f"{len(observations)} observations but {len(alpha)}/{len(beta)} latents"
            )
    total = float(log_prior_eps(eps, hp)) + float(log_prior_s(s, hp))
    if mode == BIVARIATE:
        if corr is None:
            raise DomainError("bivariate mode requires CorrelationParams")
        total += log_prior_taurho(corr.tau, corr.rho, corr.n, hp)
    if not math.isfinite(total):
        return -math.inf
    try:
        region.shell_area(eps, hp.delta, s)
    except DegenerateRegionError:
        return -math.inf if observations else total
    for obs, a, b in zip(observations, alpha, beta):
        total += float(log_weight(obs, a, b, eps, s, hp, mode, corr))
        if total == -math.inf:
            return total
    return total
