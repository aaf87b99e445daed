"""Posterior sampling of (eps, s[, tau, rho]) with averaged acceptance ratios.

Each iteration proposes new global parameters, scores ``K`` candidate latent
error pairs per challenge (the current latent plus ``K - 1`` fresh uniform
points on the unit square) under both the current and the proposed
parameters, accepts with the ratio of the summed weights, and finally
resamples every latent from its candidates in proportion to the retained
weights.

The production path (:func:`run`) executes a compiled kernel on blocks of
pre-drawn noise. :func:`step_details` is an independent numpy reference of a
single iteration built from :mod:`dpest.model`; it also exposes both weight
arrays for inspection.
"""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels, model, region
from .exceptions import ChainStateError, DegenerateRegionError, DomainError
from .model import BIVARIATE, INDEPENDENT, ChallengeObservation, CorrelationParams, HyperParams
from .stats import RngHandle, as_generator

_NOISE_BUDGET = 4_000_000  # floats per pre-drawn block


@dataclasses.dataclass(frozen=True)
class SamplerConfig:
    """Settings of one chain.

    Defaults are the full-scale settings (``K = 1000``, ``1e5``
    iterations, ``1e4`` burn-in). ``fixed_s`` holds the strength constant
    instead of sampling it, which is how the s-sweep experiments are run.
    """

    iterations: int = 100_000
    burn_in: int = 10_000
    n_aux: int = 1000
    prop_var_eps: float = 1e-2
    prop_var_s: float = 1e-4
    prop_var_tau: float = 1e-6
    prop_var_rho: float = 1e-6
    mode: str = INDEPENDENT
    seed: int = 0
    stream: int = 0
    init_eps: float = 1.0
    init_s: float = 0.5
    init_tau: float = 0.0
    init_rho: float = 0.0
    fixed_s: float | None = None

    def __post_init__(self):
        model.check_mode(self.mode)
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise DomainError("need 0 <= burn_in < iterations")
        if self.n_aux < 2:
            raise DomainError("n_aux (K) must be at least 2")
        for name in ("prop_var_eps", "prop_var_s", "prop_var_tau", "prop_var_rho"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")
        if not (math.isfinite(self.init_eps) and self.init_eps > 0):
            raise DomainError("init_eps must be positive")
        if self.fixed_s is not None:
            region.check_strength(self.fixed_s)
        elif not 0 < self.init_s < 1:
            raise DomainError("init_s must lie in (0, 1)")
        RngHandle(self.seed, self.stream)

    @property
    def start_s(self) -> float:
        return self.init_s if self.fixed_s is None else self.fixed_s

    @property
    def proposal_sd(self) -> np.ndarray:
        return np.sqrt([self.prop_var_eps, self.prop_var_s, self.prop_var_tau, self.prop_var_rho])


@dataclasses.dataclass
class ChainState:
    eps: float
    s: float
    alpha: np.ndarray
    beta: np.ndarray
    tau: float = 0.0
    rho: float = 0.0
    iteration: int = 0

    def copy(self) -> "ChainState":
        return dataclasses.replace(self, alpha=self.alpha.copy(), beta=self.beta.copy())


@dataclasses.dataclass(frozen=True)
class SampleRecord:
    iteration: int
    eps: float
    s: float
    accepted: bool
    tau: float | None = None
    rho: float | None = None


@dataclasses.dataclass
class SampleTrace:
    """Post-burn-in samples of one chain, stored column-wise."""

    iteration: np.ndarray
    eps: np.ndarray
    s: np.ndarray
    accepted: np.ndarray
    log_accept: np.ndarray
    mode: str
    tau: np.ndarray | None = None
    rho: np.ndarray | None = None
    final_state: ChainState | None = None

    def __len__(self) -> int:
        return len(self.eps)

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if len(self) else math.nan

    @property
    def parameter_names(self) -> list[str]:
        return ["eps", "s", "tau", "rho"] if self.mode == BIVARIATE else ["eps", "s"]

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def records(self) -> Iterator[SampleRecord]:
        biv = self.mode == BIVARIATE
        for i in range(len(self)):
            yield SampleRecord(
                iteration=int(self.iteration[i]),
                eps=float(self.eps[i]),
                s=float(self.s[i]),
                accepted=bool(self.accepted[i]),
                tau=float(self.tau[i]) if biv else None,
                rho=float(self.rho[i]) if biv else None,
            )


@dataclasses.dataclass
class StepNoise:
    """All randomness consumed by one iteration."""

    z: np.ndarray  # (4,) standard normals for eps, s, tau, rho
    aux: np.ndarray  # (n, K-1, 2) uniforms for fresh candidates
    u_accept: float  # in (0, 1]
    u_resample: np.ndarray  # (n,)


def draw_noise(gen: np.random.Generator, n: int, n_aux: int, size: int):
    z = gen.standard_normal((size, 4))
    aux = gen.random((size, n, n_aux - 1, 2))
    u_acc = 1.0 - gen.random(size)  # (0, 1]
    u_res = gen.random((size, n))
    return z, aux, u_acc, u_res


def _block_size(n: int, n_aux: int) -> int:
    per_iter = 2 * n * (n_aux - 1) + n + 5
    return max(1, min(65_536, _NOISE_BUDGET // per_iter))


# --------------------------------------------------------------------------
# numpy reference step
# --------------------------------------------------------------------------

@dataclasses.dataclass
class StepDetails:
    proposal: tuple[float, float, float, float]
    cand_alpha: np.ndarray  # (n, K); column 0 is the incoming latent
    cand_beta: np.ndarray
    log_w: np.ndarray  # (n, K) under current parameters
    log_w_prop: np.ndarray  # (n, K) under proposed parameters, same candidates
    log_accept: float
    accepted: bool
    picks: np.ndarray
    state: ChainState


def _log_prior(eps, s, tau, rho, hp, mode, n_common, fixed):
    if not eps > 0:
        return -math.inf
    lp = float(model.log_prior_eps(eps, hp)) + math.log(eps)
    if not fixed:
        lp += float(model.log_prior_s(s, hp))
    if mode == BIVARIATE:
        lp += model.log_prior_taurho(tau, rho, n_common, hp)
    return lp


def _corr(tau, rho, n_common, mode):
    if mode != BIVARIATE:
        return None
    return _UncheckedCorr(tau, rho, n_common)


@dataclasses.dataclass(frozen=True)
class _UncheckedCorr:
    # proposals may leave the feasible set; the prior already zeroes them
    tau: float
    rho: float
    n: int


def _resample_index(log_w: np.ndarray, u: float) -> int:
    w = np.exp(log_w - log_w.max())
    cum = np.cumsum(w)
    pick = int(np.searchsorted(cum, u * cum[-1], side="right"))
    pick = min(pick, len(w) - 1)
    while w[pick] == 0.0:
        pick -= 1
    return pick


def step_details(state: ChainState, observations: Sequence[ChallengeObservation],
                 hp: HyperParams, cfg: SamplerConfig, noise: StepNoise) -> StepDetails:
    """One iteration computed with the model-level densities."""
    observations = list(observations)
    n = len(observations)
    mode = cfg.mode
    n_common = model.common_n(observations) if (mode == BIVARIATE and n) else 2
    fixed = cfg.fixed_s is not None
    sd = cfg.proposal_sd
    z = noise.z
    eps_p = state.eps * math.exp(sd[0] * z[0])
    s_p = state.s if fixed else state.s + sd[1] * z[1]
    tau_p, rho_p = state.tau, state.rho
    if mode == BIVARIATE:
        tau_p = state.tau + sd[2] * z[2]
        rho_p = state.rho + sd[3] * z[3]

    lp_cur = _log_prior(state.eps, state.s, state.tau, state.rho, hp, mode, n_common, fixed)
    lp_new = _log_prior(eps_p, s_p, tau_p, rho_p, hp, mode, n_common, fixed)
    ok = math.isfinite(lp_new)
    if ok:
        try:
            region.shell_area(eps_p, hp.delta, s_p)
        except DegenerateRegionError:
            ok = False

    k_aux = cfg.n_aux
    cand_a = np.empty((n, k_aux))
    cand_b = np.empty((n, k_aux))
    log_w = np.full((n, k_aux), -np.inf)
    log_w_prop = np.full((n, k_aux), -np.inf)
    corr_cur = _corr(state.tau, state.rho, n_common, mode)
    corr_new = _corr(tau_p, rho_p, n_common, mode)
    log_ratio = lp_new - lp_cur if ok else -math.inf
    for j, obs in enumerate(observations):
        cand_a[j, 0], cand_b[j, 0] = state.alpha[j], state.beta[j]
        cand_a[j, 1:] = noise.aux[j, :, 0]
        cand_b[j, 1:] = noise.aux[j, :, 1]
        log_w[j] = model.log_weight(obs, cand_a[j], cand_b[j], state.eps, state.s, hp, mode, corr_cur)
        if ok:
            log_w_prop[j] = model.log_weight(obs, cand_a[j], cand_b[j], eps_p, s_p, hp, mode, corr_new)
        l_cur = logsumexp(log_w[j])
        if l_cur == -np.inf:
            raise ChainStateError(f"all candidate weights vanish for challenge {obs.id!r}")
        if ok:
            log_ratio += logsumexp(log_w_prop[j]) - l_cur

    log_a = min(0.0, log_ratio) if not math.isnan(log_ratio) else -math.inf
    accepted = ok and math.log(noise.u_accept) <= log_a
    new = state.copy()
    new.iteration = state.iteration + 1
    if accepted:
        new.eps, new.s, new.tau, new.rho = eps_p, s_p, tau_p, rho_p
    kept = log_w_prop if accepted else log_w
    picks = np.zeros(n, dtype=int)
    for j in range(n):
        picks[j] = _resample_index(kept[j], noise.u_resample[j])
        new.alpha[j] = cand_a[j, picks[j]]
        new.beta[j] = cand_b[j, picks[j]]
    return StepDetails((eps_p, s_p, tau_p, rho_p), cand_a, cand_b, log_w, log_w_prop,
                       log_a, bool(accepted), picks, new)


def step(state: ChainState, observations, hp: HyperParams, cfg: SamplerConfig, rng):
    """Advance ``state`` by one iteration; returns ``(new_state, record)``."""
    gen = as_generator(rng)
    z, aux, u_acc, u_res = draw_noise(gen, len(list(observations)), cfg.n_aux, 1)
    det = step_details(state, observations, hp, cfg, StepNoise(z[0], aux[0], float(u_acc[0]), u_res[0]))
    new = det.state
    biv = cfg.mode == BIVARIATE
    rec = SampleRecord(new.iteration, new.eps, new.s, det.accepted,
                       new.tau if biv else None, new.rho if biv else None)
    return new, rec


# --------------------------------------------------------------------------
# compiled chain
# --------------------------------------------------------------------------

def _pack_observations(observations):
    n0 = np.array([o.n0 for o in observations], dtype=float)
    n1 = np.array([o.n1 for o in observations], dtype=float)
    xs = np.array([o.x for o in observations], dtype=float)
    ys = np.array([o.y for o in observations], dtype=float)
    log_comb = (gammaln(n0 + 1) - gammaln(xs + 1) - gammaln(n0 - xs + 1)
                + gammaln(n1 + 1) - gammaln(ys + 1) - gammaln(n1 - ys + 1))
    return n0, n1, xs, ys, log_comb


def initial_state(observations, hp: HyperParams, cfg: SamplerConfig, gen) -> ChainState:
    """Start at the configured parameters with latents drawn uniformly on the shell."""
    n = len(observations)
    s0 = cfg.start_s
    if cfg.mode == BIVARIATE and n:
        CorrelationParams(cfg.init_tau, cfg.init_rho, model.common_n(observations))
    pts = region.sample_uniform_shell(cfg.init_eps, hp.delta, s0, gen, size=n)
    return ChainState(cfg.init_eps, s0, np.asarray(pts.alpha, float).copy(),
                      np.asarray(pts.beta, float).copy(), cfg.init_tau, cfg.init_rho, 0)


def run(observations: Sequence[ChallengeObservation], hp: HyperParams,
        cfg: SamplerConfig, state: ChainState | None = None) -> SampleTrace:
    """Run one chain and return its post-burn-in trace.

    The result is a deterministic function of ``(observations, hp, cfg)``.
    """
    observations = list(observations)
    n = len(observations)
    biv = cfg.mode == BIVARIATE
    n_common = model.common_n(observations) if (biv and n) else 2
    gen = RngHandle(cfg.seed, cfg.stream).generator()
    if state is None:
        state = initial_state(observations, hp, cfg, gen)
    else:
        state = state.copy()
    n0, n1, xs, ys, log_comb = _pack_observations(observations)
    hp_arr = np.array([hp.sigma_eps_sq, hp.beta_a, hp.beta_b, hp.sigma_tau_sq])
    params = np.array([state.eps, state.s, state.tau, state.rho])
    alpha = np.ascontiguousarray(state.alpha, dtype=float)
    beta = np.ascontiguousarray(state.beta, dtype=float)

    total = cfg.iterations
    keep = total - cfg.burn_in
    out_params = np.empty((keep, 4))
    out_acc = np.empty(keep, dtype=np.bool_)
    out_log_a = np.empty(keep)
    block = _block_size(n, cfg.n_aux)
    done = 0
    while done < total:
        size = min(block, total - done)
        z, aux, u_acc, u_res = draw_noise(gen, n, cfg.n_aux, size)
        bp = np.empty((size, 4))
        ba = np.empty(size, dtype=np.bool_)
        bl = np.empty(size)
        status, where = _kernels.run_block(
            params, alpha, beta, n0, n1, xs, ys, log_comb, biv, float(n_common),
            hp.delta, hp_arr, cfg.proposal_sd, cfg.fixed_s is not None,
            z, aux, u_acc, u_res, bp, ba, bl,
        )
        if status != _kernels.OK:
            raise ChainStateError(f"chain lost all posterior weight at iteration {done + where + 1}")
        lo = max(0, cfg.burn_in - done)
        if lo < size:
            dst = done + lo - cfg.burn_in
            out_params[dst:dst + size - lo] = bp[lo:]
            out_acc[dst:dst + size - lo] = ba[lo:]
            out_log_a[dst:dst + size - lo] = bl[lo:]
        done += size

    final = ChainState(float(params[0]), float(params[1]), alpha, beta,
                       float(params[2]), float(params[3]), total)
    return SampleTrace(
        iteration=np.arange(cfg.burn_in + 1, total + 1),
        eps=out_params[:, 0].copy(),
        s=out_params[:, 1].copy(),
        accepted=out_acc,
        log_accept=out_log_a,
        mode=cfg.mode,
        tau=out_params[:, 2].copy() if biv else None,
        rho=out_params[:, 3].copy() if biv else None,
        final_state=final,
    )


def run_chains(observations, hp: HyperParams, cfg: SamplerConfig, n_chains: int = 1,
               max_workers: int | None = None) -> list[SampleTrace]:
    """Independent chains on consecutive stream ids, returned in chain order."""
    if n_chains < 1:
        raise DomainError("n_chains must be >= 1")
    cfgs = [dataclasses.replace(cfg, stream=cfg.stream + i) for i in range(n_chains)]
    observations = list(observations)
    if n_chains == 1:
        return [run(observations, hp, cfgs[0])]
    workers = max_workers or min(n_chains, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run(observations, hp, c), cfgs))
