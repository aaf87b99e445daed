"""Distribution kernel: densities, CDFs, quantiles and seedable draws.

Everything here is vectorised over numpy arrays where that is cheap, and
returns plain floats for scalar input.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import special

from .exceptions import DomainError, NotPositiveDefiniteError

_UINT64_MAX = 2**64 - 1
_LOG_2PI = math.log(2.0 * math.pi)


def _scalarize(out):
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return out.item()
    return out


@dataclasses.dataclass(frozen=True)
class RngHandle:
    """Seed plus stream id for a reproducible, independent random stream.

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream,))`` and
    fed to the counter-based Philox bit generator, so distinct stream ids
    give independent sequences and equal handles give identical ones.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= _UINT64_MAX:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngHandle, an int seed, or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngHandle):
        return rng.generator()
    if rng is None:
        raise DomainError("an explicit random source is required")
    return RngHandle(int(rng)).generator()


# --------------------------------------------------------------------------
# Standard normal
# --------------------------------------------------------------------------

def std_normal_cdf(x):
    return _scalarize(special.ndtr(np.asarray(x, dtype=float)))


def std_normal_inv_cdf(u):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("inverse normal CDF requires u in (0, 1)")
    return _scalarize(special.ndtri(u))


# --------------------------------------------------------------------------
# Noncentral chi-square with one degree of freedom
# --------------------------------------------------------------------------

def _ncx1_cdf_root(r, shift):
    # P((Z + shift)^2 <= r^2) for r >= 0
    return special.ndtr(r - shift) - special.ndtr(-r - shift)


def noncentral_chisq1_cdf(c, nc):
    """CDF of ``(Z + sqrt(nc))**2`` with ``Z ~ N(0, 1)``, evaluated at ``c``."""
    c = np.asarray(c, dtype=float)
    nc = np.asarray(nc, dtype=float)
    if np.any(nc < 0):
        raise DomainError("noncentrality must be nonnegative")
    r = np.sqrt(np.maximum(c, 0.0))
    out = np.where(c > 0, _ncx1_cdf_root(r, np.sqrt(nc)), 0.0)
    return _scalarize(out)


def noncentral_chisq1_inv_cdf(u, nc, n_iter: int = 200):
    """Quantile of the one-degree-of-freedom noncentral chi-square.

    Bisection is carried out on ``r = sqrt(c)``, where the CDF has a bounded
    derivative, and the bracket ``[0, shift + Phi^-1(u) + 10]`` is widened
    geometrically until it contains the target.
    """
    u = np.asarray(u, dtype=float)
    nc = np.asarray(nc, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("quantile level must lie in (0, 1)")
    if np.any(nc < 0):
        raise DomainError("noncentrality must be nonnegative")
    u, nc = np.broadcast_arrays(u, nc)
    shift = np.sqrt(nc)
    lo = np.zeros(u.shape)
    hi = np.maximum(shift + special.ndtri(u) + 10.0, 1.0)
    for _ in range(64):
        short = _ncx1_cdf_root(hi, shift) < u
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = _ncx1_cdf_root(mid, shift) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(hi, 1e-300)):
            break
    r = 0.5 * (lo + hi)
    return _scalarize(r * r)


# --------------------------------------------------------------------------
# Binomial
# --------------------------------------------------------------------------

def log_binomial_pmf(k, n, p):
    """Exact log-pmf of Binomial(n, p) at k, with p in {0, 1} handled."""
    k = np.asarray(k)
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    if np.any(k < 0) or np.any(k > n):
        raise DomainError("binomial count must satisfy 0 <= k <= n")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("binomial probability must lie in [0, 1]")
    k = k.astype(float)
    n = n.astype(float)
    log_comb = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    out = log_comb + special.xlogy(k, p) + special.xlog1py(n - k, -p)
    return _scalarize(out)


# --------------------------------------------------------------------------
# Continuous densities
# --------------------------------------------------------------------------

def log_normal_pdf(x, mu, var):
    x = np.asarray(x, dtype=float)
    return _scalarize(-0.5 * (_LOG_2PI + np.log(var) + (x - mu) ** 2 / var))


def log_truncnormal_pdf(x, lo, hi, mu, var):
    """Log density of N(mu, var) truncated to ``[lo, hi]``; -inf outside."""
    if not lo < hi:
        raise DomainError("truncation bounds must satisfy lo < hi")
    if not var > 0:
        raise DomainError("variance must be positive")
    sd = math.sqrt(var)
    mass = special.ndtr((hi - mu) / sd) - special.ndtr((lo - mu) / sd)
    x = np.asarray(x, dtype=float)
    inside = (x >= lo) & (x <= hi)
    dens = -0.5 * (_LOG_2PI + math.log(var) + (x - mu) ** 2 / var) - math.log(mass)
    return _scalarize(np.where(inside, dens, -np.inf))


def beta_log_pdf(x, a, b):
    if not (a > 0 and b > 0):
        raise DomainError("Beta shape parameters must be positive")
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= 1)
    xc = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = special.xlogy(a - 1, xc) + special.xlog1py(b - 1, -xc) - special.betaln(a, b)
    return _scalarize(np.where(inside, dens, -np.inf))


def log_bvn_pdf(x, mean, cov):
    """Log density of a bivariate normal.

    Raises ``NotPositiveDefiniteError`` unless ``cov`` is symmetric positive
    definite.
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or x.shape[-1] != 2:
        raise DomainError("log_bvn_pdf expects 2-vectors and a 2x2 covariance")
    a, b, c, d = cov[0, 0], cov[0, 1], cov[1, 0], cov[1, 1]
    if not math.isclose(b, c, rel_tol=1e-12, abs_tol=0.0):
        raise NotPositiveDefiniteError("covariance is not symmetric")
    det = a * d - b * b
    if not (a > 0 and det > 0):
        raise NotPositiveDefiniteError("covariance is not positive definite")
    dx = x - mean
    quad = (d * dx[..., 0] ** 2 - 2 * b * dx[..., 0] * dx[..., 1] + a * dx[..., 1] ** 2) / det
    return _scalarize(-_LOG_2PI - 0.5 * math.log(det) - 0.5 * quad)


# --------------------------------------------------------------------------
# Draws
# --------------------------------------------------------------------------

def uniform_draw(rng, size=None):
    """Uniform draw on the open interval (0, 1)."""
    gen = as_generator(rng)
    u = gen.random(size)
    # Generator.random is [0, 1); redraw the (rare) exact zeros
    while np.any(u == 0.0):
        if np.ndim(u) == 0:
            u = gen.random()
        else:
            zero = u == 0.0
            u[zero] = gen.random(int(zero.sum()))
    return u


def normal_draw(rng, mu, var, size=None):
    if not var >= 0:
        raise DomainError("variance must be nonnegative")
    return as_generator(rng).normal(mu, math.sqrt(var), size)


def lognormal_draw(rng, log_center, var, size=None):
    if not var >= 0:
        raise DomainError("variance must be nonnegative")
    return as_generator(rng).lognormal(log_center, math.sqrt(var), size)
