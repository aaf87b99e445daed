"""Bayesian estimation of differential privacy from membership-inference error counts."""
from .attack import NormalLRTAttack, fit_normal, measure_mia, measure_mia_fast, roc_sweep
from .estimator import BayesianDPEstimator
from .exceptions import (
    ChainStateError,
    ConfigError,
    DegenerateRegionError,
    DomainError,
    DPEstError,
    InsufficientDataError,
    NotPositiveDefiniteError,
    ShapeError,
)
from .model import ChallengeObservation, CorrelationParams, HyperParams
from .region import ErrorPoint, PrivacyParams
from .sampler import SamplerConfig, run, run_chains
from .stats import RngHandle

__version__ = "0.1.0"
