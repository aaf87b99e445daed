"""Scikit-learn style front end for the posterior sampler."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import diagnostics, sampler
from .exceptions import ConfigError
from .model import BIVARIATE, INDEPENDENT, HyperParams, check_mode
from .validation import check_counts, check_seed


class BayesianDPEstimator(BaseEstimator):
    """Posterior of the privacy level ``eps`` from attack error counts.

    ``fit`` runs one or more independent chains and stores their pooled
    post-burn-in samples.

    Parameters
    ----------
    delta : float
        The fixed DP delta. Required; there is no sensible default.
    mode : {"independent", "bivariate"}
        Binomial counts from independent attacks, or the correlated
        normal model for cross-fed counts (estimates ``tau`` and ``rho``).
    sigma_eps_sq, beta_a, beta_b, sigma_tau_sq, sigma_rho_sq : float
        Prior hyperparameters. ``sigma_rho_sq`` is accepted but unused.
    iterations, burn_in, n_aux : int
        Chain length, discarded prefix and number of candidate latents.
    prop_var_eps, prop_var_s, prop_var_tau, prop_var_rho : float
        Random-walk proposal variances (log scale for ``eps``).
    init_eps, init_s, init_tau, init_rho : float
        Starting point of every chain.
    fixed_s : float or None
        Hold the attack strength at this value instead of sampling it.
    n_chains : int
        Chains run on consecutive random streams of ``random_state``.
    random_state : int
        Seed. Results are a deterministic function of all parameters.

    Attributes
    ----------
    traces_ : list of SampleTrace
    samples_ : dict of ndarray
        Pooled samples per parameter, chains concatenated in order.
    n_observations_ : int
    """

    def __init__(self, delta=None, mode=INDEPENDENT, sigma_eps_sq=10.0, beta_a=1.0, beta_b=1.0,
                 sigma_tau_sq=1e-4, sigma_rho_sq=1e-2, iterations=100_000, burn_in=10_000,
                 n_aux=1000, prop_var_eps=1e-2, prop_var_s=1e-4, prop_var_tau=1e-6,
                 prop_var_rho=1e-6, init_eps=1.0, init_s=0.5, init_tau=0.0, init_rho=0.0,
                 fixed_s=None, n_chains=1, random_state=0):
        self.delta = delta
        self.mode = mode
        self.sigma_eps_sq = sigma_eps_sq
        self.beta_a = beta_a
        self.beta_b = beta_b
        self.sigma_tau_sq = sigma_tau_sq
        self.sigma_rho_sq = sigma_rho_sq
        self.iterations = iterations
        self.burn_in = burn_in
        self.n_aux = n_aux
        self.prop_var_eps = prop_var_eps
        self.prop_var_s = prop_var_s
        self.prop_var_tau = prop_var_tau
        self.prop_var_rho = prop_var_rho
        self.init_eps = init_eps
        self.init_s = init_s
        self.init_tau = init_tau
        self.init_rho = init_rho
        self.fixed_s = fixed_s
        self.n_chains = n_chains
        self.random_state = random_state

    def hyper_params(self) -> HyperParams:
        if self.delta is None:
            raise ConfigError("delta is required")
        return HyperParams(
            delta=self.delta, sigma_eps_sq=self.sigma_eps_sq, beta_a=self.beta_a,
            beta_b=self.beta_b, sigma_tau_sq=self.sigma_tau_sq, sigma_rho_sq=self.sigma_rho_sq,
        )

    def sampler_config(self) -> sampler.SamplerConfig:
        return sampler.SamplerConfig(
            iterations=self.iterations, burn_in=self.burn_in, n_aux=self.n_aux,
            prop_var_eps=self.prop_var_eps, prop_var_s=self.prop_var_s,
            prop_var_tau=self.prop_var_tau, prop_var_rho=self.prop_var_rho,
            mode=check_mode(self.mode), seed=check_seed(self.random_state), stream=0,
            init_eps=self.init_eps, init_s=self.init_s, init_tau=self.init_tau,
            init_rho=self.init_rho, fixed_s=self.fixed_s,
        )

    def fit(self, X, y=None):
        """Sample the posterior given counts ``X`` (rows ``n0, n1, x, y``)."""
        observations = check_counts(X)
        hp = self.hyper_params()
        cfg = self.sampler_config()
        if not isinstance(self.n_chains, int) or self.n_chains < 1:
            raise ConfigError("n_chains must be a positive integer")
        self.traces_ = sampler.run_chains(observations, hp, cfg, self.n_chains)
        names = self.traces_[0].parameter_names
        self.samples_ = {
            name: np.concatenate([t.column(name) for t in self.traces_]) for name in names
        }
        self.accepted_ = np.concatenate([t.accepted for t in self.traces_])
        self.n_observations_ = len(observations)
        return self

    @property
    def acceptance_rate_(self) -> float:
        check_is_fitted(self, "samples_")
        return float(self.accepted_.mean())

    def credible_interval(self, level: float = 0.9, param: str = "eps"):
        check_is_fitted(self, "samples_")
        return diagnostics.credible_interval(self._param(param), level)

    def posterior_quantiles(self, probs=diagnostics.QUANTILE_LEVELS, param: str = "eps"):
        check_is_fitted(self, "samples_")
        return diagnostics.quantiles(self._param(param), probs)

    def summary(self, n_lags: int = 100, bins: int = 50) -> dict:
        """Pooled-sample summary plus the 90% interval of each chain."""
        check_is_fitted(self, "samples_")
        out = diagnostics.summarize(self.samples_, self.accepted_, n_lags=n_lags, bins=bins)
        out["chains"] = [
            {"stream": i, "acceptance_rate": t.acceptance_rate,
             "eps_ci90": list(diagnostics.credible_interval(t.eps, 0.9))}
            for i, t in enumerate(self.traces_)
        ]
        return out

    def _param(self, name):
        if name not in self.samples_:
            raise ConfigError(f"no samples for {name!r}; have {sorted(self.samples_)}")
        return self.samples_[name]


__all__ = ["BayesianDPEstimator", "BIVARIATE", "INDEPENDENT"]
