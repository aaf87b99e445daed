"""Posterior summaries and chain diagnostics."""
from __future__ import annotations

import numpy as np

from .exceptions import DomainError, InsufficientDataError

QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


def _samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("no samples")
    return x


def acf(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag``.

    Uses the biased normalisation (every lag divided by ``n`` times the
    variance), so lag 0 is exactly 1. Raises ``DomainError`` for a
    constant sequence, where the autocorrelation is undefined.
    """
    x = _samples(x)
    if max_lag < 0:
        raise DomainError("max_lag must be >= 0")
    n = x.size
    max_lag = min(int(max_lag), n - 1)
    d = x - x.mean()
    c0 = np.dot(d, d)
    if c0 == 0.0:
        raise DomainError("autocorrelation undefined for a constant sequence")
    size = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    r = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    out = r / c0
    out[0] = 1.0
    return out


def quantiles(x, probs=QUANTILE_LEVELS) -> np.ndarray:
    """Empirical quantiles with linear interpolation between order statistics."""
    x = _samples(x)
    probs = np.asarray(probs, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise DomainError("quantile levels must lie in (0, 1)")
    return np.quantile(x, probs, method="linear")


def credible_interval(x, level: float = 0.9) -> tuple[float, float]:
    """Equal-tailed interval; ``level = 0.9`` gives the 5% and 95% quantiles."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    lo, hi = quantiles(x, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def hist2d(xs, ys, bins=50, range=None):
    """Dense 2-D count matrix with its bin edges.

    Returns
    -------
    counts : ndarray of int64, shape (bins_x, bins_y)
    x_edges, y_edges : ndarray
    """
    xs = _samples(xs)
    ys = _samples(ys)
    if xs.size != ys.size:
        raise DomainError("xs and ys must have equal length")
    counts, xe, ye = np.histogram2d(xs, ys, bins=bins, range=range)
    return counts.astype(np.int64), xe, ye


def ess(x) -> float:
    """Effective sample size from the initial positive sequence of the ACF.

    Autocorrelations are summed in adjacent pairs until a pair sum turns
    negative. The result is capped at the number of samples; a constant
    chain has ESS 1.
    """
    x = _samples(x)
    n = x.size
    if n < 3 or np.ptp(x) == 0:
        return 1.0 if n >= 1 else 0.0
    rho = acf(x, n - 1)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
    return float(min(n, n / tau))


def decimate(x, max_points: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Evenly thinned copy of a series for plotting, with the kept indices."""
    x = np.asarray(x)
    if max_points < 1:
        raise DomainError("max_points must be >= 1")
    step = max(1, -(-x.size // max_points))
    idx = np.arange(0, x.size, step)
    return idx, x[idx]


def summarize(columns: dict, accepted, n_lags: int = 100, bins: int = 50) -> dict:
    """Posterior summary of named sample columns.

    ``columns`` maps parameter names to sample arrays (``eps`` and ``s``
    must be present). Returns plain python containers ready for JSON.
    """
    out = {"n_samples": int(len(columns["eps"])), "acceptance_rate": float(np.mean(accepted))}
    params = {}
    for name, x in columns.items():
        x = np.asarray(x, dtype=float)
        q = quantiles(x)
        lo, hi = credible_interval(x, 0.9)
        try:
            lags = acf(x, n_lags)[1:].tolist()
        except DomainError:
            lags = None
        params[name] = {
            "mean": float(x.mean()),
            "quantiles": {f"{p:g}": float(v) for p, v in zip(QUANTILE_LEVELS, q)},
            "ci90": [lo, hi],
            "acf": lags,
            "ess": ess(x),
        }
    out["parameters"] = params
    counts, xe, ye = hist2d(columns["eps"], columns["s"], bins=bins)
    out["hist2d_eps_s"] = {"eps_edges": xe.tolist(), "s_edges": ye.tolist(), "counts": counts.tolist()}
    return out
