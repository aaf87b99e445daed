"""Geometry of the (epsilon, delta) trade-off region and its strength shells.

The region ``R(eps, delta)`` is the set of (type-I, type-II) error pairs
attainable by any membership test against an (eps, delta)-DP algorithm.
The shell ``R_s(eps, delta) = R(eps, delta) minus R(s*eps, s*delta)`` is the
prior support of the error pair of an attack of strength ``s``.

All inequalities are evaluated after multiplying through by ``exp(-eps)`` so
that large ``eps`` never overflows.
"""
from __future__ import annotations

import dataclasses
import math
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .exceptions import DegenerateRegionError, DomainError
from .stats import as_generator

AREA_FLOOR = 1e-12
MAX_CONSECUTIVE_REJECTIONS = 10_000_000


@dataclasses.dataclass(frozen=True)
class PrivacyParams:
    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise DomainError(f"eps must be a finite nonnegative number, got {self.eps}")
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")


class ErrorPoint(NamedTuple):
    alpha: float
    beta: float


def check_strength(s: float) -> float:
    """Validate an attack strength; ``s = 1`` would make the shell empty."""
    if not 0 <= s < 1:
        raise DomainError(f"strength s must lie in [0, 1), got {s}")
    return float(s)


def _check_unit(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any((alpha < 0) | (alpha > 1) | (beta < 0) | (beta > 1)):
        raise DomainError("error probabilities must lie in [0, 1]")
    return alpha, beta


def _out(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _contains(alpha, beta, eps, delta):
    q = np.exp(-eps)
    lower = (1.0 - delta) * q
    upper = 1.0 + delta * q
    a_q = alpha * q
    b_q = beta * q
    return (
        (a_q + beta >= lower)
        & (b_q + alpha >= lower)
        & (b_q + alpha <= upper)
        & (a_q + beta <= upper)
    )


def contains(alpha, beta, eps: float, delta: float = 0.0):
    """True where ``(alpha, beta)`` lies in ``R(eps, delta)``.

    Equivalent to ``alpha + e^eps beta >= 1 - delta``,
    ``beta + e^eps alpha >= 1 - delta``, ``beta + e^eps alpha <= e^eps + delta``
    and ``alpha + e^eps beta <= e^eps + delta``.
    """
    PrivacyParams(eps, delta)
    alpha, beta = _check_unit(alpha, beta)
    return _out(_contains(alpha, beta, eps, delta))


def shell_contains(alpha, beta, eps: float, delta: float, s: float):
    PrivacyParams(eps, delta)
    check_strength(s)
    alpha, beta = _check_unit(alpha, beta)
    inner = _contains(alpha, beta, s * eps, s * delta)
    return _out(_contains(alpha, beta, eps, delta) & ~inner)


def region_area(eps: float, delta: float = 0.0) -> float:
    """Area of ``R(eps, delta)``: one minus the two excluded corners."""
    PrivacyParams(eps, delta)
    return 1.0 - 2.0 * (1.0 - delta) ** 2 * float(expit(-eps))


def shell_area(eps: float, delta: float, s: float) -> float:
    """Closed-form area of ``R_s(eps, delta)``.

    Raises ``DegenerateRegionError`` when the area is below ``AREA_FLOOR``
    (for instance ``eps = delta = 0``).
    """
    PrivacyParams(eps, delta)
    check_strength(s)
    area = 2.0 * (
        (1.0 - s * delta) ** 2 * float(expit(-s * eps))
        - (1.0 - delta) ** 2 * float(expit(-eps))
    )
    if not area >= AREA_FLOOR:
        raise DegenerateRegionError(
            f"shell R_s(eps={eps}, delta={delta}) with s={s} has area {area:.3g}"
        )
    return area


def shell_log_density(alpha, beta, eps: float, delta: float, s: float):
    """Log of the uniform density on the shell: ``-log|R_s|`` inside, -inf outside."""
    log_area = math.log(shell_area(eps, delta, s))
    inside = shell_contains(alpha, beta, eps, delta, s)
    return _out(np.where(inside, -log_area, -np.inf))


def sample_uniform_shell(eps: float, delta: float, s: float, rng, size=None):
    """Uniform draws on the shell by rejection from the unit square.

    Returns an ``ErrorPoint`` of floats (``size=None``) or of arrays.
    """
    shell_area(eps, delta, s)
    gen = as_generator(rng)
    want = 1 if size is None else int(size)
    alphas: list[np.ndarray] = [np.empty(0)]
    betas: list[np.ndarray] = [np.empty(0)]
    got = 0
    rejected = 0
    batch = max(64, want)
    while got < want:
        pts = gen.random((batch, 2))
        keep = _contains(pts[:, 0], pts[:, 1], eps, delta) & ~_contains(
            pts[:, 0], pts[:, 1], s * eps, s * delta
        )
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            rejected += batch
            if rejected >= MAX_CONSECUTIVE_REJECTIONS:
                raise DegenerateRegionError(
                    f"{rejected} consecutive rejections sampling the shell"
                )
            continue
        rejected = batch - 1 - idx[-1]
        take = idx[: want - got]
        alphas.append(pts[take, 0])
        betas.append(pts[take, 1])
        got += take.size
    a = np.concatenate(alphas)
    b = np.concatenate(betas)
    if size is None:
        return ErrorPoint(float(a[0]), float(b[0]))
    return ErrorPoint(a, b)


def implied_epsilon(alpha, beta, delta: float = 0.0):
    """Smallest eps with ``(alpha, beta)`` in ``R(eps, delta)``.

    Each of the four region inequalities reads ``e^eps * den >= num``; the
    answer is the largest ``log(num / den)`` over them, floored at zero.
    Points no finite eps can explain give ``inf``.
    """
    alpha, beta = _check_unit(alpha, beta)
    nums = np.stack([1 - delta - alpha, 1 - delta - beta, beta - delta, alpha - delta])
    dens = np.stack([beta, alpha, 1 - alpha, 1 - beta])
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(nums > 0, np.log(nums / dens), 0.0)
    need = np.where((nums > 0) & (dens == 0), np.inf, need)
    return _out(np.maximum(need.max(axis=0), 0.0))
