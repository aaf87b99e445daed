import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sst

from dpest import stats
from dpest.exceptions import DomainError, NotPositiveDefiniteError

mpmath.mp.dps = 40


def mp_phi(x):
    return float(mpmath.ncdf(x))


class TestNormal:
    def test_cdf_zero(self):
        assert stats.std_normal_cdf(0.0) == 0.5

    def test_cdf_against_high_precision(self):
        for x in (-7.5, -3.0, -1.0, 0.3, 1.959964, 4.2):
            assert abs(stats.std_normal_cdf(x) - mp_phi(x)) <= 1e-10
        assert abs(stats.std_normal_cdf(1.959964) - 0.975) < 1e-6

    def test_round_trip(self):
        for x in range(-5, 6):
            assert abs(stats.std_normal_inv_cdf(stats.std_normal_cdf(x)) - x) <= 1e-8

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_inverse_domain(self, u):
        with pytest.raises(DomainError):
            stats.std_normal_inv_cdf(u)

    def test_vectorised(self):
        out = stats.std_normal_cdf(np.array([-1.0, 0.0, 1.0]))
        assert out.shape == (3,)
        assert isinstance(stats.std_normal_cdf(0.1), float)


class TestNoncentralChiSquare:
    def test_zero_point(self):
        assert stats.noncentral_chisq1_cdf(0.0, 3.0) == 0.0

    def test_central_95(self):
        assert abs(stats.noncentral_chisq1_cdf(3.841459, 0.0) - 0.95) < 1e-6
        assert abs(stats.noncentral_chisq1_inv_cdf(0.95, 0.0) - 3.841459) <= 1e-5

    def test_closed_form_value(self):
        expected = mp_phi(0) - mp_phi(-4)
        assert abs(stats.noncentral_chisq1_cdf(4.0, 4.0) - expected) < 1e-12
        assert abs(expected - 0.499968) < 1e-6

    def test_matches_scipy_ncx2(self):
        # scipy's series implementation as an independent route
        for c in (0.1, 1.0, 5.0, 20.0):
            for nc in (0.5, 2.0, 9.0):
                assert abs(stats.noncentral_chisq1_cdf(c, nc) - sst.ncx2.cdf(c, 1, nc)) < 1e-9

    @pytest.mark.parametrize("u", [0.01, 0.1, 0.5, 0.9, 0.99])
    @pytest.mark.parametrize("nc", [0.0, 1.0, 10.0])
    def test_round_trip(self, u, nc):
        c = stats.noncentral_chisq1_inv_cdf(u, nc)
        assert abs(stats.noncentral_chisq1_cdf(c, nc) - u) <= 1e-9

    def test_monotone_inverse(self):
        us = np.linspace(0.001, 0.999, 50)
        cs = stats.noncentral_chisq1_inv_cdf(us, 2.5)
        assert np.all(np.diff(cs) > 0)

    def test_large_noncentrality_bracket(self):
        c = stats.noncentral_chisq1_inv_cdf(0.999999, 400.0)
        assert abs(stats.noncentral_chisq1_cdf(c, 400.0) - 0.999999) < 1e-9

    def test_domain(self):
        with pytest.raises(DomainError):
            stats.noncentral_chisq1_inv_cdf(1.0, 1.0)
        with pytest.raises(DomainError):
            stats.noncentral_chisq1_cdf(1.0, -1.0)

    @given(st.floats(0.0, 50.0), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_cdf_monotone(self, a, b, nc):
        lo, hi = sorted((a, b))
        assert stats.noncentral_chisq1_cdf(lo, nc) <= stats.noncentral_chisq1_cdf(hi, nc)


def exact_log_binom(k, n, p):
    p = Fraction(p)
    prob = math.comb(n, k) * p**k * (1 - p) ** (n - k)
    return float(mpmath.log(mpmath.mpf(prob.numerator) / prob.denominator))


class TestBinomial:
    def test_degenerate(self):
        assert stats.log_binomial_pmf(0, 10, 0.0) == 0.0
        assert stats.log_binomial_pmf(10, 10, 1.0) == 0.0
        assert stats.log_binomial_pmf(1, 10, 0.0) == -math.inf

    def test_half(self):
        assert abs(stats.log_binomial_pmf(1, 2, 0.5) - math.log(0.5)) < 1e-15

    @pytest.mark.parametrize("k,n,p", [(40, 100, 0.4), (3, 7, 0.25), (0, 20, 0.125), (19, 20, 0.9)])
    def test_exact_oracle(self, k, n, p):
        assert abs(stats.log_binomial_pmf(k, n, p) - exact_log_binom(k, n, p)) <= 1e-12

    def test_k_above_n(self):
        with pytest.raises(DomainError):
            stats.log_binomial_pmf(5, 4, 0.5)


class TestDensities:
    def test_half_normal(self):
        for x in (0.0, 0.5, 3.0):
            expected = math.log(2) + sst.norm.logpdf(x, 0, math.sqrt(10))
            assert abs(stats.log_truncnormal_pdf(x, 0, np.inf, 0, 10) - expected) < 1e-12
        assert stats.log_truncnormal_pdf(-0.1, 0, np.inf, 0, 10) == -math.inf

    def test_truncnormal_normalises(self):
        xs = np.linspace(-0.5, 1.0, 200001)
        dens = np.exp(stats.log_truncnormal_pdf(xs, -0.5, 1.0, 0.2, 0.3))
        assert abs(np.trapezoid(dens, xs) - 1) < 1e-6

    def test_beta(self):
        assert stats.beta_log_pdf(0.5, 1, 1) == 0.0
        assert abs(stats.beta_log_pdf(0.3, 2.5, 4) - sst.beta.logpdf(0.3, 2.5, 4)) < 1e-12
        assert stats.beta_log_pdf(1.2, 2, 2) == -math.inf

    def test_parameter_domain(self):
        with pytest.raises(DomainError):
            stats.log_truncnormal_pdf(0.0, 1, 0, 0, 1)
        with pytest.raises(DomainError):
            stats.log_truncnormal_pdf(0.0, 0, 1, 0, 0)
        with pytest.raises(DomainError):
            stats.beta_log_pdf(0.5, 0, 1)

    def test_bvn_at_mean(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        val = stats.log_bvn_pdf([1.0, 2.0], [1.0, 2.0], cov)
        assert abs(val + math.log(2 * math.pi * math.sqrt(np.linalg.det(cov)))) < 1e-12

    def test_bvn_diagonal(self):
        val = stats.log_bvn_pdf([0.4, -1.0], [0.0, 0.5], np.diag([2.0, 0.5]))
        expected = sst.norm.logpdf(0.4, 0, math.sqrt(2)) + sst.norm.logpdf(-1.0, 0.5, math.sqrt(0.5))
        assert abs(val - expected) < 1e-12

    def test_bvn_correlated_normalises(self):
        cov = np.array([[1.0, 0.8], [0.8, 1.5]])
        g = np.linspace(-9, 9, 901)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([xx, yy], axis=-1)
        dens = np.exp(stats.log_bvn_pdf(pts, [0.0, 0.0], cov))
        h = g[1] - g[0]
        assert abs(dens.sum() * h * h - 1) < 1e-6
        ref = sst.multivariate_normal([0, 0], cov).logpdf([0.3, -0.7])
        assert abs(stats.log_bvn_pdf([0.3, -0.7], [0, 0], cov) - ref) < 1e-12

    def test_bvn_not_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            stats.log_bvn_pdf([0, 0], [0, 0], [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotPositiveDefiniteError):
            stats.log_bvn_pdf([0, 0], [0, 0], [[1.0, 0.1], [0.2, 1.0]])


class TestRng:
    def test_same_handle_same_stream(self):
        a = stats.RngHandle(7, 3).generator().random(100)
        b = stats.RngHandle(7, 3).generator().random(100)
        assert a.tobytes() == b.tobytes()

    def test_streams_differ(self):
        a = stats.RngHandle(7, 0).generator().random(1000)
        b = stats.RngHandle(7, 1).generator().random(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_handle_validation(self):
        with pytest.raises(DomainError):
            stats.RngHandle(-1)
        with pytest.raises(DomainError):
            stats.RngHandle(0, 2**64)
        assert stats.RngHandle(2**64 - 1).seed == 2**64 - 1

    def test_explicit_source_required(self):
        with pytest.raises(DomainError):
            stats.as_generator(None)

    def test_uniform_open_interval(self):
        u = stats.uniform_draw(stats.RngHandle(1), 100_000)
        assert np.all((u > 0) & (u < 1))

    def test_lognormal_median(self):
        x = stats.lognormal_draw(stats.RngHandle(2), math.log(3.0), 0.25, 100_000)
        # the sample median of 1e5 draws has sd about 1.25 * 0.5 * 3 / sqrt(1e5)
        assert abs(np.median(x) - 3.0) < 4 * 1.2533 * 0.5 * 3 / math.sqrt(1e5)

    def test_normal_draw(self):
        x = stats.normal_draw(stats.RngHandle(3), 1.0, 4.0, 100_000)
        assert abs(x.mean() - 1.0) < 4 * 2 / math.sqrt(1e5)
        with pytest.raises(DomainError):
            stats.normal_draw(stats.RngHandle(3), 0.0, -1.0)


@settings(max_examples=50)
@given(st.floats(-8, 5))
def test_inverse_normal_round_trip_property(x):
    # above ~5 the upper tail 1 - u is no longer resolved by a double
    u = stats.std_normal_cdf(x)
    if 0 < u < 1:
        assert abs(stats.std_normal_inv_cdf(u) - x) < 1e-6
