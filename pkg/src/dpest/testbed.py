"""Mechanisms with known privacy and synthetic count scenarios.

The mechanisms release a noisy sum of a small dataset of values in
``[0, 1]``. A challenge base pairs a dataset ``d`` with a record ``z`` not
in it; hypothesis 0 runs the mechanism on ``d`` and hypothesis 1 on
``d + [z]``. The score of an output is the output itself.
"""
from __future__ import annotations

import dataclasses
import math
import threading

import numpy as np
from scipy import optimize, special

from . import region, stats
from .exceptions import ConfigError, DomainError
from .model import ChallengeObservation


@dataclasses.dataclass(frozen=True)
class ChallengeBase:
    d: tuple
    z: float

    def __post_init__(self):
        values = tuple(float(v) for v in self.d)
        if any(not 0.0 <= v <= 1.0 for v in values) or not 0.0 <= self.z <= 1.0:
            raise DomainError("record values must lie in [0, 1]")
        if self.z in values:
            raise DomainError("the challenge record z must not be in the dataset")
        object.__setattr__(self, "d", values)
        object.__setattr__(self, "z", float(self.z))

    def dataset(self, hypothesis: int) -> np.ndarray:
        if hypothesis == 0:
            return np.asarray(self.d)
        if hypothesis == 1:
            return np.asarray(self.d + (self.z,))
        raise DomainError(f"hypothesis must be 0 or 1, got {hypothesis!r}")


def make_base(rng, size: int = 20, z: float = 1.0) -> ChallengeBase:
    """Random dataset of ``size`` values in [0, 1) plus the record ``z``."""
    gen = stats.as_generator(rng)
    d = gen.random(size)
    while z in d:
        d = gen.random(size)
    return ChallengeBase(tuple(d), z)


class Mechanism:
    """Noisy-sum mechanism base class.

    Subclasses implement ``_noise``. ``n_draws`` counts every output drawn,
    which the measurement harnesses rely on for cost accounting.
    """

    name = "mechanism"

    def __init__(self):
        self.n_draws = 0
        self._lock = threading.Lock()

    def _noise(self, gen, size):
        raise NotImplementedError

    def draw(self, dataset, rng, size=None):
        gen = stats.as_generator(rng)
        with self._lock:
            self.n_draws += 1 if size is None else int(size)
        return float(np.sum(dataset)) + self._noise(gen, size)

    def score(self, z, output):
        return output

    # analytic metadata; None where not known
    def trade_off(self, alpha):
        return None

    def delta_at(self, eps):
        return None

    def epsilon_at(self, delta: float):
        """Smallest eps for which the mechanism is (eps, delta)-DP."""
        if not 0.0 <= delta < 1.0:
            raise DomainError("delta must lie in [0, 1)")
        if self.delta_at(0.0) is None:
            return None
        if self.delta_at(0.0) <= delta:
            return 0.0
        hi = 1.0
        while self.delta_at(hi) > delta:
            hi *= 2.0
            if hi > 1e4:
                return math.inf
        return optimize.brentq(lambda e: self.delta_at(e) - delta, 0.0, hi, xtol=1e-13, rtol=1e-13)

    def params(self) -> dict:
        return {}


class LaplaceSumMechanism(Mechanism):
    """Sum plus Laplace(sensitivity / eps_true) noise; pure eps_true-DP."""

    name = "laplace"

    def __init__(self, sensitivity: float = 1.0, eps_true: float = 1.0):
        super().__init__()
        if not (sensitivity > 0 and eps_true > 0):
            raise DomainError("sensitivity and eps_true must be positive")
        self.sensitivity = float(sensitivity)
        self.eps_true = float(eps_true)
        self.scale = self.sensitivity / self.eps_true

    def _noise(self, gen, size):
        return gen.laplace(0.0, self.scale, size)

    def _cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 0.5 * np.exp(np.minimum(t, 0) / self.scale),
                        1 - 0.5 * np.exp(-np.maximum(t, 0) / self.scale))

    def _inv_cdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0.5, self.scale * np.log(2 * u),
                        -self.scale * np.log(2 * (1 - u)))

    def trade_off(self, alpha):
        """Type-II error of the optimal level-``alpha`` test of a worst-case shift."""
        alpha = np.asarray(alpha, dtype=float)
        t = self._inv_cdf(np.clip(1.0 - alpha, 1e-300, 1.0 - 1e-16))
        out = self._cdf(t - self.sensitivity)
        out = np.where(alpha <= 0, 1.0, np.where(alpha >= 1, 0.0, out))
        return out.item() if out.ndim == 0 else out

    def delta_at(self, eps):
        return max(0.0, 1.0 - math.exp((eps - self.eps_true) / 2.0))

    def params(self):
        return {"sensitivity": self.sensitivity, "eps_true": self.eps_true}


class GaussianSumMechanism(Mechanism):
    """Sum plus N(0, sigma^2) noise.

    With ``mu = sensitivity / sigma`` the optimal trade-off is
    ``beta(alpha) = Phi(Phi^-1(1 - alpha) - mu)`` and the privacy profile is
    ``delta(eps) = Phi(mu/2 - eps/mu) - e^eps Phi(-mu/2 - eps/mu)``.
    """

    name = "gaussian"

    def __init__(self, sensitivity: float = 1.0, sigma: float = 1.0):
        super().__init__()
        if not (sensitivity >= 0 and sigma > 0):
            raise DomainError("need sensitivity >= 0 and sigma > 0")
        self.sensitivity = float(sensitivity)
        self.sigma = float(sigma)
        self.mu = self.sensitivity / self.sigma

    def _noise(self, gen, size):
        return gen.normal(0.0, self.sigma, size)

    def trade_off(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        out = special.ndtr(special.ndtri(1.0 - alpha) - self.mu)
        return out.item() if out.ndim == 0 else out

    def delta_at(self, eps):
        if self.mu == 0.0:
            return 0.0
        mu = self.mu
        # e^eps Phi(-mu/2 - eps/mu), combined in log space to avoid overflow
        second = math.exp(eps + special.log_ndtr(-mu / 2 - eps / mu))
        return max(0.0, float(special.ndtr(mu / 2 - eps / mu)) - second)

    def params(self):
        return {"sensitivity": self.sensitivity, "sigma": self.sigma}


class DeterministicSumMechanism(Mechanism):
    """Noise-free sum: no privacy at all, the attack separates perfectly."""

    name = "deterministic"

    def _noise(self, gen, size):
        return 0.0 if size is None else np.zeros(size)


MECHANISMS = {
    "laplace": LaplaceSumMechanism,
    "gaussian": GaussianSumMechanism,
    "deterministic": DeterministicSumMechanism,
}


def make_mechanism(spec: str) -> Mechanism:
    """Build a mechanism from ``"name"`` or ``"name:key=value,key=value"``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in MECHANISMS:
        raise ConfigError(f"unknown mechanism {name!r}; known: {sorted(MECHANISMS)}")
    kwargs = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"malformed mechanism parameter {item!r}")
        try:
            kwargs[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"mechanism parameter {key!r} must be numeric") from None
    try:
        return MECHANISMS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for mechanism {name!r}: {exc}") from None


# --------------------------------------------------------------------------
# Synthetic count scenarios
# --------------------------------------------------------------------------

STRONG_X = (40, 50, 60, 100, 100, 110, 120, 200, 200, 200)
STRONG_Y = (250, 200, 150, 100, 120, 100, 100, 80, 70, 60)
STRONG_N = 1000


def generate_scenario_weak(n: int = 10, N: int = 1000, rng=0, a: float = 10.0, b: float = 10.0):
    """Error rates drawn from Beta(a, b), counts binomial on N trials each."""
    if n < 1 or N < 1:
        raise DomainError("need n >= 1 and N >= 1")
    gen = stats.as_generator(rng)
    alpha = gen.beta(a, b, n)
    beta = gen.beta(a, b, n)
    xs = gen.binomial(N, alpha)
    ys = gen.binomial(N, beta)
    return [ChallengeObservation(f"weak-{i}", N, N, int(x), int(y)) for i, (x, y) in enumerate(zip(xs, ys))]


def scenario_strong():
    return [
        ChallengeObservation(f"strong-{i}", STRONG_N, STRONG_N, x, y)
        for i, (x, y) in enumerate(zip(STRONG_X, STRONG_Y))
    ]


def scenario_fig2(N: int) -> ChallengeObservation:
    if N < 1:
        raise DomainError("N must be >= 1")
    k = (2 * N) // 5
    return ChallengeObservation(f"fig2-{N}", N, N, k, k)


def generate_grouped(groups: int, sizes, eps: float, delta: float, s: float, spread: float, N: int, rng):
    """Forward simulation of the grouped-attack hierarchy.

    Group centres are uniform on the shell; member rates are normal about
    the centre with covariance ``spread * I`` truncated to the unit square;
    counts are independent binomials.

    Returns
    -------
    list of (ErrorPoint, list of ChallengeObservation)
    """
    sizes = list(sizes)
    if len(sizes) != groups:
        raise DomainError(f"{groups} groups but {len(sizes)} sizes")
    if not spread >= 0:
        raise DomainError("spread must be nonnegative")
    if N < 1:
        raise DomainError("N must be >= 1")
    gen = stats.as_generator(rng)
    sd = math.sqrt(spread)
    out = []
    for g, size in enumerate(sizes):
        centre = region.sample_uniform_shell(eps, delta, s, gen)
        rates = np.empty((size, 2))
        for m in range(size):
            while True:
                p = np.array(centre) + sd * gen.standard_normal(2)
                if np.all((p >= 0) & (p <= 1)):
                    break
            rates[m] = p
        xs = gen.binomial(N, rates[:, 0]) if size else []
        ys = gen.binomial(N, rates[:, 1]) if size else []
        members = [
            ChallengeObservation(f"g{g}-{m}", N, N, int(x), int(y))
            for m, (x, y) in enumerate(zip(xs, ys))
        ]
        out.append((centre, members))
    return out
