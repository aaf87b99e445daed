"""Independent numerical oracles used by the test-suite.

Nothing here imports the package under test; each function recomputes its
quantity from first principles with scipy.
"""
import numpy as np
from scipy import integrate, special, stats


def in_region(a, b, eps, delta):
    e = np.exp(eps)
    return ((a + e * b >= 1 - delta) & (b + e * a >= 1 - delta)
            & (b + e * a <= e + delta) & (a + e * b <= e + delta))


def _beta_band(alpha, e, d):
    """Lower/upper beta limits of R(e, d) at each alpha (arrays broadcast)."""
    q = np.exp(-e)
    lo = np.maximum.reduce([np.zeros_like(alpha * q), (1 - d - alpha) * q, 1 - d - alpha / q])
    hi = np.minimum.reduce([np.ones_like(alpha * q), (1 - alpha) / q + d, 1 + (d - alpha) * q])
    return lo, np.maximum(hi, lo)


def region_likelihood_mass(x, n0, y, n1, eps, delta, alpha_grid):
    """Integral over R(eps, delta) of Binom(x|n0,a) Binom(y|n1,b) da db.

    The beta-direction integral is exact (regularised incomplete beta);
    the alpha direction uses the trapezoid rule on ``alpha_grid``.
    """
    eps = np.atleast_1d(np.asarray(eps, float))[:, None]
    delta = np.atleast_1d(np.asarray(delta, float))[:, None]
    a = alpha_grid[None, :]
    lo, hi = _beta_band(a, eps, delta)
    inner = (special.betainc(y + 1, n1 - y + 1, hi) - special.betainc(y + 1, n1 - y + 1, lo)) / (n1 + 1)
    fa = stats.binom.pmf(x, n0, alpha_grid)[None, :]
    return integrate.trapezoid(fa * inner, alpha_grid, axis=1)


def closed_area(eps, delta, s):
    f = lambda e, d: (1 - d) ** 2 * np.exp(-e) / (1 + np.exp(-e))
    return 2 * (f(s * eps, s * delta) - f(eps, delta))


def eps_posterior_cdf_single(x, n0, y, n1, delta, sigma_eps_sq, beta_a, beta_b,
                             eps_grid, s_nodes=32, alpha_points=4001):
    """Posterior CDF of eps for one observation, marginalising s and latents.

    s is integrated with Gauss-Legendre nodes over +-12 prior sds.
    """
    alpha_grid = np.linspace(0.0, 1.0, alpha_points)
    pmf = stats.binom.pmf(x, n0, alpha_grid)
    keep = pmf > pmf.max() * 1e-14
    lo_i, hi_i = np.flatnonzero(keep)[[0, -1]]
    alpha_grid = alpha_grid[max(lo_i - 1, 0):hi_i + 2]
    m = beta_a / (beta_a + beta_b)
    sd = np.sqrt(beta_a * beta_b / ((beta_a + beta_b) ** 2 * (beta_a + beta_b + 1)))
    s_lo, s_hi = max(m - 12 * sd, 1e-9), min(m + 12 * sd, 1 - 1e-9)
    nodes, weights = np.polynomial.legendre.leggauss(s_nodes)
    s_vals = 0.5 * (s_hi - s_lo) * nodes + 0.5 * (s_hi + s_lo)
    s_w = 0.5 * (s_hi - s_lo) * weights * stats.beta.pdf(s_vals, beta_a, beta_b)
    outer = region_likelihood_mass(x, n0, y, n1, eps_grid, np.full_like(eps_grid, delta), alpha_grid)
    dens = np.zeros_like(eps_grid)
    for sv, sw in zip(s_vals, s_w):
        inner = region_likelihood_mass(x, n0, y, n1, sv * eps_grid,
                                       np.full_like(eps_grid, sv * delta), alpha_grid)
        dens += sw * (outer - inner) / closed_area(eps_grid, delta, sv)
    dens *= 2 * stats.norm.pdf(eps_grid, 0, np.sqrt(sigma_eps_sq))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(eps_grid))])
    return cdf / cdf[-1]
