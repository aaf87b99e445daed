"""Deterministic quadrature of the eps posterior for a single observation.

Used as a reference for the sampler. For a fixed region ``R(e, d)`` the
likelihood mass ``int_R Binom(x|n0, a) Binom(y|n1, b) da db`` is computed
by integrating over ``b`` exactly (regularised incomplete beta) between
the region's boundary lines and over ``a`` with the trapezoid rule. The
shell mass is the difference of two such masses, the strength ``s`` is
integrated by Gauss-Legendre nodes under its Beta prior, and ``eps`` lives
on a uniform grid.
"""
from __future__ import annotations

import numpy as np
from scipy import special, stats

from .model import ChallengeObservation, HyperParams


def _region_mass(obs: ChallengeObservation, e, d, a_grid, a_pmf):
    q = np.exp(-e)[:, None]
    d = d[:, None]
    a = a_grid[None, :]
    lo = np.maximum(np.maximum((1 - d - a) * q, 1 - d - a / q), 0.0)
    hi = np.minimum(np.minimum((1 - a) / q + d, 1 + (d - a) * q), 1.0)
    hi = np.maximum(hi, lo)
    k, n = obs.y, obs.n1
    band = (special.betainc(k + 1, n - k + 1, hi) - special.betainc(k + 1, n - k + 1, lo)) / (n + 1)
    return np.trapezoid(a_pmf[None, :] * band, a_grid, axis=1)


def _shell_area(e, d, s):
    f = lambda x, dd: (1 - dd) ** 2 * special.expit(-x)
    return 2 * (f(s * e, s * d) - f(e, d))


def eps_posterior_cdf(obs: ChallengeObservation, hp: HyperParams, eps_max: float = 8.0,
                      step: float = 0.005, s_nodes: int = 12, alpha_points: int = 1001,
                      chunk: int = 200):
    """Posterior CDF of eps on the grid ``0, step, ..., eps_max``.

    Returns
    -------
    grid, cdf : ndarray
    """
    grid = np.linspace(0.0, eps_max, int(round(eps_max / step)) + 1)
    a_grid = np.linspace(0.0, 1.0, alpha_points)
    a_pmf = stats.binom.pmf(obs.x, obs.n0, a_grid)
    keep = np.flatnonzero(a_pmf > a_pmf.max() * 1e-14)
    sl = slice(max(keep[0] - 1, 0), keep[-1] + 2)
    a_grid, a_pmf = a_grid[sl], a_pmf[sl]

    a, b = hp.beta_a, hp.beta_b
    mean = a / (a + b)
    sd = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    s_lo, s_hi = max(mean - 12 * sd, 0.0), min(mean + 12 * sd, 1.0)
    x, w = np.polynomial.legendre.leggauss(s_nodes)
    s_vals = 0.5 * (s_hi - s_lo) * x + 0.5 * (s_hi + s_lo)
    s_w = 0.5 * (s_hi - s_lo) * w * stats.beta.pdf(s_vals, a, b)

    dens = np.zeros_like(grid)
    inner = grid > 0  # the shell is empty at eps = 0 only when delta = 0
    if hp.delta > 0:
        inner[:] = True
    idx = np.flatnonzero(inner)
    for start in range(0, idx.size, chunk):
        j = idx[start:start + chunk]
        e = grid[j]
        d = np.full_like(e, hp.delta)
        outer = _region_mass(obs, e, d, a_grid, a_pmf)
        acc = np.zeros_like(e)
        for sv, sw in zip(s_vals, s_w):
            area = _shell_area(e, d, sv)
            ok = area > 1e-12
            m = _region_mass(obs, sv * e, sv * d, a_grid, a_pmf)
            acc += np.where(ok, sw * (outer - m) / np.where(ok, area, 1.0), 0.0)
        dens[j] = acc
    dens *= stats.halfnorm.pdf(grid, scale=np.sqrt(hp.sigma_eps_sq))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    return grid, cdf / cdf[-1]


def sup_distance(samples, grid, cdf) -> float:
    """Largest gap between the empirical CDF of ``samples`` and ``cdf`` on ``grid``."""
    srt = np.sort(np.asarray(samples, dtype=float))
    emp = np.searchsorted(srt, grid, side="right") / srt.size
    return float(np.max(np.abs(emp - cdf)))
