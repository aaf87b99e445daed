import json
from pathlib import Path

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dpest import BayesianDPEstimator, model, quadrature, testbed
from dpest.exceptions import ConfigError, DomainError, ShapeError
from dpest.validation import check_counts

ORACLE = json.loads((Path(__file__).parent / "data" / "posterior_cdf_oracle.json").read_text())


def test_check_counts():
    obs = check_counts([[10, 10, 2, 3], [5, 6, 1, 0]])
    assert obs[1] == model.ChallengeObservation("1", 5, 6, 1, 0)
    assert check_counts([]) == []
    assert check_counts(obs) == obs
    with pytest.raises(ShapeError):
        check_counts([[1, 2, 3]])
    with pytest.raises(DomainError):
        check_counts([[10, 10, 2.5, 3]])
    with pytest.raises(DomainError):
        check_counts([[10, 10, 12, 3]])


def test_params_roundtrip():
    est = BayesianDPEstimator(delta=0.05, n_aux=50)
    assert clone(est).get_params()["n_aux"] == 50
    est.set_params(iterations=10)
    assert est.iterations == 10


def test_delta_required():
    with pytest.raises(ConfigError):
        BayesianDPEstimator().fit([[10, 10, 1, 1]])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BayesianDPEstimator(delta=0.0).credible_interval()


def test_fit_strong_scenario_and_summary():
    counts = [[o.n0, o.n1, o.x, o.y] for o in testbed.scenario_strong()]
    est = BayesianDPEstimator(delta=0.05, iterations=4000, burn_in=1000, n_aux=50, n_chains=2)
    est.fit(np.array(counts))
    lo, hi = est.credible_interval()
    assert lo < hi
    assert est.samples_["eps"].size == 6000
    summ = est.summary()
    assert len(summ["chains"]) == 2
    assert summ["parameters"]["eps"]["ci90"] == [lo, hi]
    q = est.posterior_quantiles([0.5])
    assert lo < q[0] < hi
    with pytest.raises(ConfigError):
        est.credible_interval(param="tau")


def test_two_chains_agree():
    obs = testbed.scenario_strong()
    est = BayesianDPEstimator(delta=0.05, iterations=20_000, burn_in=2000, n_aux=100,
                              n_chains=2, random_state=11).fit(obs)
    (a0, a1), (b0, b1) = [c["eps_ci90"] for c in est.summary()["chains"]]
    assert a0 < b1 and b0 < a1


def test_package_quadrature_matches_frozen_oracle():
    obs = model.ChallengeObservation("o", 100, 100, 40, 40)
    hp = model.HyperParams(delta=0.05, beta_a=5000, beta_b=556)
    grid, cdf = quadrature.eps_posterior_cdf(obs, hp)
    assert grid[-1] == 8.0 and abs(grid[1] - 0.005) < 1e-15
    ref_grid = np.array(ORACLE["eps"])
    ref = np.array(ORACLE["cdf"])
    assert np.max(np.abs(np.interp(ref_grid, grid, cdf) - ref)) < 2e-4
    assert cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)
