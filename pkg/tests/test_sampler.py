import dataclasses
import math

import numpy as np
import pytest
from scipy import stats as sst

from dpest import model, region, sampler
from dpest.exceptions import ChainStateError, DomainError, ShapeError
from dpest.model import ChallengeObservation as Obs
from dpest.stats import RngHandle

OBS = [Obs("a", 100, 100, 20, 30), Obs("b", 100, 100, 15, 40), Obs("c", 100, 100, 25, 25)]
HP = model.HyperParams(delta=0.05, beta_a=2.0, beta_b=2.0)


def reference_chain(observations, hp, cfg):
    """Replay ``run`` with the numpy reference step on the same noise."""
    gen = RngHandle(cfg.seed, cfg.stream).generator()
    state = sampler.initial_state(observations, hp, cfg, gen)
    n = len(observations)
    block = sampler._block_size(n, cfg.n_aux)
    rows, done = [], 0
    while done < cfg.iterations:
        size = min(block, cfg.iterations - done)
        z, aux, u_acc, u_res = sampler.draw_noise(gen, n, cfg.n_aux, size)
        for i in range(size):
            det = sampler.step_details(state, observations, hp, cfg,
                                       sampler.StepNoise(z[i], aux[i], float(u_acc[i]), u_res[i]))
            state = det.state
            rows.append((state.eps, state.s, state.tau, state.rho, det.accepted))
        done += size
    return np.array(rows), state


@pytest.mark.parametrize("mode,fixed_s", [("independent", None), ("bivariate", None),
                                          ("independent", 0.6)])
def test_kernel_matches_reference(mode, fixed_s):
    cfg = sampler.SamplerConfig(iterations=300, burn_in=0, n_aux=8, mode=mode, seed=5,
                                prop_var_eps=0.05, prop_var_s=1e-3, prop_var_tau=1e-5,
                                prop_var_rho=1e-5, init_s=0.5, fixed_s=fixed_s)
    trace = sampler.run(OBS, HP, cfg)
    ref, ref_state = reference_chain(OBS, HP, cfg)
    np.testing.assert_allclose(trace.eps, ref[:, 0], rtol=1e-12)
    np.testing.assert_allclose(trace.s, ref[:, 1], rtol=1e-12)
    assert np.array_equal(trace.accepted, ref[:, 4].astype(bool))
    if mode == "bivariate":
        np.testing.assert_allclose(trace.tau, ref[:, 2], rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(trace.rho, ref[:, 3], rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(trace.final_state.alpha, ref_state.alpha)
    assert 0 < trace.acceptance_rate < 1


def test_acceptance_hand_evaluation():
    obs = [Obs("a", 20, 20, 3, 4)]
    hp = model.HyperParams(delta=0.05, beta_a=3.0, beta_b=2.0)
    cfg = sampler.SamplerConfig(n_aux=3, prop_var_eps=0.04, prop_var_s=0.01)
    state = sampler.ChainState(2.0, 0.5, np.array([0.12]), np.array([0.13]))
    aux = np.array([[[0.2, 0.09], [0.6, 0.6]]])
    noise = sampler.StepNoise(np.array([0.5, -1.0, 0.0, 0.0]), aux, 0.3, np.array([0.4]))
    det = sampler.step_details(state, obs, hp, cfg, noise)

    eps_p, s_p = 2.0 * math.exp(0.2 * 0.5), 0.5 - 0.1
    assert det.proposal[:2] == pytest.approx((eps_p, s_p), rel=1e-15)

    def area(e, s):
        f = lambda x, d: (1 - d) ** 2 * math.exp(-x) / (1 + math.exp(-x))
        return 2 * (f(s * e, s * 0.05) - f(e, 0.05))

    def inside(a, b, e, d):
        q = math.exp(e)
        return a + q * b >= 1 - d and b + q * a >= 1 - d and b + q * a <= q + d and a + q * b <= q + d

    def w(a, b, e, s):
        if not (inside(a, b, e, 0.05) and not inside(a, b, s * e, s * 0.05)):
            return 0.0
        lik = (math.comb(20, 3) * a**3 * (1 - a) ** 17) * (math.comb(20, 4) * b**4 * (1 - b) ** 16)
        return lik / area(e, s)

    def prior(e, s):
        half_normal = math.exp(-e * e / 20)
        return half_normal * s**2 * (1 - s) * e  # Beta(3, 2) kernel, with the eps Jacobian

    pts = [(0.12, 0.13), (0.2, 0.09), (0.6, 0.6)]
    cur = sum(w(a, b, 2.0, 0.5) for a, b in pts)
    new = sum(w(a, b, eps_p, s_p) for a, b in pts)
    ratio = prior(eps_p, s_p) / prior(2.0, 0.5) * new / cur
    assert math.exp(det.log_accept) == pytest.approx(min(1.0, ratio), rel=1e-10)
    assert det.accepted == (0.3 <= min(1.0, ratio))


def test_zero_move_is_always_accepted():
    cfg = sampler.SamplerConfig(n_aux=5)
    gen = np.random.default_rng(0)
    state = sampler.initial_state(OBS, HP, cfg, gen)
    z, aux, _, u_res = sampler.draw_noise(gen, len(OBS), 5, 1)
    det = sampler.step_details(state, OBS, HP, cfg,
                               sampler.StepNoise(np.zeros(4), aux[0], 1.0, u_res[0]))
    assert det.log_accept == 0.0 and det.accepted
    np.testing.assert_array_equal(det.log_w, det.log_w_prop)


def test_shared_candidates_and_resampling_support():
    cfg = sampler.SamplerConfig(n_aux=50, prop_var_eps=0.1)
    gen = np.random.default_rng(1)
    state = sampler.initial_state(OBS, HP, cfg, gen)
    for _ in range(20):
        z, aux, u_acc, u_res = sampler.draw_noise(gen, len(OBS), 50, 1)
        det = sampler.step_details(state, OBS, HP, cfg,
                                   sampler.StepNoise(z[0], aux[0], float(u_acc[0]), u_res[0]))
        # both weight sets are evaluated at the same candidates
        np.testing.assert_array_equal(det.cand_alpha[:, 1:], aux[0][:, :, 0])
        kept = det.log_w_prop if det.accepted else det.log_w
        assert np.all(np.isfinite(kept[np.arange(len(OBS)), det.picks]))
        state = det.state
        assert np.all(region.shell_contains(state.alpha, state.beta, state.eps, HP.delta, state.s))


def test_determinism_and_streams():
    cfg = sampler.SamplerConfig(iterations=2000, burn_in=100, n_aux=20, seed=9)
    a = sampler.run(OBS, HP, cfg)
    b = sampler.run(OBS, HP, cfg)
    assert a.eps.tobytes() == b.eps.tobytes() and a.s.tobytes() == b.s.tobytes()
    c = sampler.run(OBS, HP, dataclasses.replace(cfg, stream=1))
    assert not np.array_equal(a.eps, c.eps)
    assert len(a) == 1900 and a.iteration[0] == 101 and a.iteration[-1] == 2000


def test_run_chains_order():
    cfg = sampler.SamplerConfig(iterations=500, burn_in=50, n_aux=10, seed=3)
    chains = sampler.run_chains(OBS, HP, cfg, n_chains=3)
    for i, ch in enumerate(chains):
        single = sampler.run(OBS, HP, dataclasses.replace(cfg, stream=i))
        assert ch.eps.tobytes() == single.eps.tobytes()


def test_final_state_valid():
    cfg = sampler.SamplerConfig(iterations=3000, burn_in=0, n_aux=30, mode="bivariate", seed=2)
    tr = sampler.run(OBS, HP, cfg)
    st = tr.final_state
    assert np.all(region.shell_contains(st.alpha, st.beta, st.eps, HP.delta, st.s))
    model.CorrelationParams(st.tau, st.rho, 100)
    recs = list(tr.records())
    assert recs[0].tau is not None and len(recs) == 3000


def test_acceptance_rate_windows_default_proposals():
    cfg = sampler.SamplerConfig(iterations=50_000, burn_in=0, n_aux=100, seed=4)
    tr = sampler.run(OBS, model.HyperParams(delta=0.05), cfg)
    rates = tr.accepted.reshape(5, 10_000).mean(axis=1)
    assert np.all((rates > 0) & (rates < 1))


def test_prior_sampling_no_data():
    cfg = sampler.SamplerConfig(iterations=200_000, burn_in=1000, n_aux=2, prop_var_eps=1.0,
                                prop_var_s=0.1, seed=1)
    hp = model.HyperParams(delta=0.0, beta_a=2.0, beta_b=5.0)
    tr = sampler.run([], hp, cfg)
    assert sst.kstest(tr.eps, sst.halfnorm(scale=math.sqrt(10)).cdf).statistic < 0.03
    assert sst.kstest(tr.s, sst.beta(2, 5).cdf).statistic < 0.03


def test_step_returns_record():
    cfg = sampler.SamplerConfig(n_aux=5, mode="bivariate")
    state = sampler.initial_state(OBS, HP, cfg, np.random.default_rng(0))
    new, rec = sampler.step(state, OBS, HP, cfg, RngHandle(0))
    assert rec.iteration == 1 and rec.eps == new.eps and rec.tau == new.tau


def test_dead_chain_detected():
    cfg = sampler.SamplerConfig(iterations=10, burn_in=0, n_aux=3)
    bad = sampler.ChainState(1.0, 0.5, np.array([0.5, 0.5, 0.5]), np.array([0.5, 0.5, 0.5]))
    noise = sampler.StepNoise(np.zeros(4), np.full((3, 2, 2), 0.5), 0.5, np.full(3, 0.5))
    with pytest.raises(ChainStateError):
        sampler.step_details(bad, OBS, HP, cfg, noise)
    with pytest.raises(ChainStateError):
        sampler.run(OBS, HP, cfg, state=bad)


@pytest.mark.parametrize("kw", [dict(burn_in=10, iterations=10), dict(n_aux=1),
                                dict(prop_var_eps=0.0), dict(init_eps=0.0), dict(init_s=1.0),
                                dict(fixed_s=1.0), dict(mode="x"), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        sampler.SamplerConfig(**kw)


def test_bivariate_needs_matched_counts():
    cfg = sampler.SamplerConfig(iterations=10, burn_in=0, n_aux=3, mode="bivariate")
    with pytest.raises(ShapeError):
        sampler.run([Obs("a", 10, 12, 1, 1)], HP, cfg)


def test_fixed_s_stays_fixed():
    cfg = sampler.SamplerConfig(iterations=1000, burn_in=0, n_aux=10, fixed_s=0.0)
    tr = sampler.run(OBS, HP, cfg)
    assert np.all(tr.s == 0.0)
