"""Channel-model tests: envelope/SNR laws against closed forms and mpmath,
sampler agreement, special-function behavior at extreme orders, link budget."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import gamma as scipy_gamma
from scipy.special import gammainc
from scipy.stats import kstest

from thzrelay.channels import (
    AlphaMuParams,
    PointingErrorParams,
    budget_from_avg_snrs,
    db_to_linear,
    dbm_to_watt,
    envelope_pdf,
    linear_to_db,
    link_budget,
    noise_power_w,
    path_gain_rf,
    path_gain_thz,
    sample_alpha_mu,
    sample_pointing,
    snr_cdf_rf,
    snr_cdf_thz,
    snr_pdf_rf,
    snr_pdf_thz,
    upper_gamma,
)
from thzrelay.montecarlo import Scenario

# 99% two-sided KS critical value at n = 1e5
KS_N = 100_000
KS_CRIT = 1.628 / math.sqrt(KS_N)


def thz_cdf_reference(x, params, pe, avg_snr):
    """Pointing-impaired SNR law via mpmath: P(mu, y) + y^(phi/a) G(mu-phi/a, y) / G(mu)."""
    y = params.b_const * (math.sqrt(x / avg_snr) / pe.s0) ** params.alpha
    ratio = pe.phi / params.alpha
    head = mpmath.gammainc(params.mu, 0, y, regularized=True)
    tail = y**ratio * mpmath.gammainc(params.mu - ratio, y) / mpmath.gamma(params.mu)
    return float(head + tail)


class TestAlphaMuParams:
    @pytest.mark.parametrize("alpha, mu, omega", [(0.0, 1.0, 1.0), (2.0, -1.0, 1.0),
                                                  (2.0, 1.0, 0.0), (math.nan, 1.0, 1.0)])
    def test_validation(self, alpha, mu, omega):
        with pytest.raises(ValueError):
            AlphaMuParams(alpha, mu, omega)

    def test_rayleigh_reduction(self):
        xs = np.array([0.3, 1.0, 2.7])
        got = envelope_pdf(xs, AlphaMuParams(2.0, 1.0))
        assert_allclose(got, 2.0 * xs * np.exp(-(xs**2)), rtol=1e-12)

    def test_nakagami_reduction(self):
        m = 3.5
        xs = np.array([0.3, 1.0, 2.7])
        got = envelope_pdf(xs, AlphaMuParams(2.0, m))
        want = 2.0 * m**m * xs ** (2 * m - 1) * np.exp(-m * xs**2) / scipy_gamma(m)
        assert_allclose(got, want, rtol=1e-12)

    def test_weibull_reduction(self):
        # mu = 1 collapses to Weibull with shape alpha
        a = 3.2
        xs = np.array([0.4, 1.0, 1.6])
        got = envelope_pdf(xs, AlphaMuParams(a, 1.0))
        want = a * xs ** (a - 1) * np.exp(-(xs**a))
        assert_allclose(got, want, rtol=1e-12)

    @pytest.mark.parametrize("alpha, mu, omega", [(2.0, 1.0, 1.0), (1.3, 2.4, 0.7),
                                                  (3.1, 0.6, 1.9)])
    def test_pdf_normalizes(self, alpha, mu, omega):
        par = AlphaMuParams(alpha, mu, omega)
        val, _ = quad(lambda r: float(envelope_pdf(r, par)), 0.0, np.inf, limit=200)
        assert_allclose(val, 1.0, rtol=1e-9)

    @pytest.mark.parametrize("k", [1.0, 2.0, 3.0])
    def test_envelope_moment_against_quadrature(self, k):
        par = AlphaMuParams(1.7, 2.2, omega=1.4)
        want, _ = quad(lambda r: r**k * float(envelope_pdf(r, par)), 0.0, np.inf,
                       limit=200)
        assert_allclose(par.envelope_moment(k), want, rtol=1e-9)

    @given(st.floats(0.1, 10.0), st.floats(0.5, 4.0))
    def test_scaled_moment_relation(self, factor, k):
        par = AlphaMuParams(1.5, 1.8, omega=0.9)
        assert_allclose(
            par.scaled(factor).envelope_moment(k),
            factor**k * par.envelope_moment(k),
            rtol=1e-11,
        )


class TestSnrLawsRf:
    def test_cdf_is_regularized_gamma(self):
        par = AlphaMuParams(1.6, 2.3, omega=1.2)
        gbar = 7.0
        xs = np.array([0.05, 0.9, 4.0, 22.0])
        want = gammainc(par.mu, par.b_const * (np.sqrt(xs / gbar)) ** par.alpha)
        assert_allclose(snr_cdf_rf(xs, par, gbar), want, rtol=1e-12)

    def test_rayleigh_cdf_is_exponential(self):
        gbar = 7.0
        got = float(snr_cdf_rf(2.0, AlphaMuParams(2.0, 1.0), gbar))
        assert_allclose(got, 1.0 - math.exp(-2.0 / gbar), rtol=1e-12)

    def test_pdf_is_cdf_derivative(self):
        par = AlphaMuParams(2.0, 1.2)
        gbar = db_to_linear(18.0)
        x = 3.0
        h = 1e-5 * x
        deriv = (float(snr_cdf_rf(x + h, par, gbar))
                 - float(snr_cdf_rf(x - h, par, gbar))) / (2 * h)
        assert_allclose(float(snr_pdf_rf(x, par, gbar)), deriv, rtol=1e-7)


class TestSnrLawsThz:
    PAR = AlphaMuParams(2.0, 2.6)
    PE = PointingErrorParams(phi=4.0)

    @pytest.mark.parametrize("x", [0.01, 0.5, 3.0, 40.0, 800.0])
    def test_cdf_against_mpmath(self, x):
        gbar = db_to_linear(15.0)
        got = float(snr_cdf_thz(x, self.PAR, self.PE, gbar))
        assert_allclose(got, thz_cdf_reference(x, self.PAR, self.PE, gbar), rtol=1e-10)

    @pytest.mark.parametrize("x", [0.2, 2.0, 25.0])
    def test_sharp_pointing_cdf_against_mpmath(self, x):
        # phi = 36 exercises the strongly negative tail order mu - phi/alpha
        par = AlphaMuParams(1.5, 1.5)
        pe = PointingErrorParams(phi=36.0)
        gbar = db_to_linear(12.0)
        got = float(snr_cdf_thz(x, par, pe, gbar))
        assert_allclose(got, thz_cdf_reference(x, par, pe, gbar), rtol=1e-10)

    def test_pdf_normalizes(self):
        gbar = db_to_linear(15.0)
        val, _ = quad(
            lambda t: float(snr_pdf_thz(math.exp(t), self.PAR, self.PE, gbar))
            * math.exp(t),
            -30.0, math.log(gbar) + 12.0, limit=300,
        )
        assert_allclose(val, 1.0, rtol=1e-7)

    def test_pdf_is_cdf_derivative(self):
        gbar = db_to_linear(15.0)
        x = 4.0
        h = 1e-5 * x
        deriv = (float(snr_cdf_thz(x + h, self.PAR, self.PE, gbar))
                 - float(snr_cdf_thz(x - h, self.PAR, self.PE, gbar))) / (2 * h)
        assert_allclose(float(snr_pdf_thz(x, self.PAR, self.PE, gbar)), deriv,
                        rtol=1e-6)

    def test_cdf_monotone_and_bounded(self):
        gbar = db_to_linear(15.0)
        xs = np.geomspace(1e-6, 1e8, 120)
        cdf = np.array([float(snr_cdf_thz(x, self.PAR, self.PE, gbar)) for x in xs])
        assert np.all(np.diff(cdf) >= -1e-13)
        assert cdf[0] >= 0.0 and cdf[-1] <= 1.0 + 1e-12
        assert_allclose(cdf[-1], 1.0, rtol=1e-9)

    @pytest.mark.parametrize("x", [0.5, 5.0, 60.0])
    def test_wide_beam_limit_is_plain_alpha_mu(self, x):
        # phi -> infinity removes the pointing loss entirely
        par = AlphaMuParams(2.0, 2.6)
        pe = PointingErrorParams(phi=1e7)
        gbar = db_to_linear(18.0)
        assert_allclose(float(snr_pdf_thz(x, par, pe, gbar)),
                        float(snr_pdf_rf(x, par, gbar)), rtol=1e-5)
        assert_allclose(float(snr_cdf_thz(x, par, pe, gbar)),
                        float(snr_cdf_rf(x, par, gbar)), rtol=1e-5)


class TestUpperGamma:
    @pytest.mark.parametrize("a", [-22.5, -3.2, -0.5, 0.7, 2.6])
    @pytest.mark.parametrize("x", [1e-12, 0.1, 1.0, 30.0, 300.0])
    def test_against_mpmath(self, a, x):
        want = float(mpmath.gammainc(a, x))
        assert_allclose(float(upper_gamma(a, x)), want, rtol=1e-11)

    @given(
        st.floats(-8.0, 4.0).filter(lambda a: min(abs(a), abs(a + 1.0)) > 1e-6),
        st.floats(0.01, 80.0),
    )
    def test_recurrence(self, a, x):
        # Gamma(a+1, x) = a Gamma(a, x) + x^a e^(-x)
        lhs = float(upper_gamma(a + 1.0, x))
        rhs = a * float(upper_gamma(a, x)) + x**a * math.exp(-x)
        assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-290)

    def test_vectorized(self):
        xs = np.array([0.5, 5.0, 50.0])
        out = upper_gamma(-1.5, xs)
        assert out.shape == xs.shape


class TestSamplers:
    def test_alpha_mu_ks(self):
        par = AlphaMuParams(2.5, 1.8, omega=1.3)
        draws = sample_alpha_mu(par, KS_N, np.random.default_rng(2024))
        stat = kstest(
            draws,
            lambda x: gammainc(par.mu, par.mu * (np.asarray(x) / par.omega) ** par.alpha),
        ).statistic
        assert stat < KS_CRIT

    def test_pointing_ks(self):
        pe = PointingErrorParams(phi=4.0, s0=0.8)
        draws = sample_pointing(pe, KS_N, np.random.default_rng(2025))
        stat = kstest(draws, lambda x: (np.asarray(x) / pe.s0) ** pe.phi).statistic
        assert stat < KS_CRIT
        assert draws.max() <= pe.s0

    def test_composite_thz_snr_ks(self):
        par = AlphaMuParams(2.0, 2.6)
        pe = PointingErrorParams(phi=4.0)
        gbar = db_to_linear(15.0)
        rng = np.random.default_rng(2026)
        snr = gbar * (sample_alpha_mu(par, KS_N, rng) * sample_pointing(pe, KS_N, rng)) ** 2
        stat = kstest(
            snr,
            lambda x: np.array(
                [float(snr_cdf_thz(v, par, pe, gbar)) for v in np.atleast_1d(x)]
            ),
        ).statistic
        assert stat < KS_CRIT


class TestPointingParams:
    @pytest.mark.parametrize(
        "jitter, phi", [(0.15, 4.0), (0.10, 9.0), (0.08, 14.0625), (0.05, 36.0)]
    )
    def test_phi_from_beam_geometry(self, jitter, phi):
        pe = PointingErrorParams.from_jitter(beam_radius_m=0.6, jitter_std_m=jitter)
        assert_allclose(pe.phi, phi, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            PointingErrorParams(phi=-1.0)
        with pytest.raises(ValueError):
            PointingErrorParams(phi=4.0, s0=0.0)


class TestLinkBudget:
    def test_demo_layout_average_snrs(self):
        budget = link_budget(10.0, rf_distance_m=75.0)
        scn = Scenario.uniform(
            1, AlphaMuParams(1.0, 1.0), AlphaMuParams(2.0, 2.6),
            PointingErrorParams(phi=4.0), budget,
        )
        # independent arithmetic: loss 32.4 + 17.3 log10(d) + 20 log10(f/GHz),
        # noise -174 dBm/Hz + 10 log10(B) + NF
        rf_db = (10.0 + 52.0
                 - (32.4 + 17.3 * math.log10(75.0) + 20.0 * math.log10(6.0))
                 - (-174.0 + 10.0 * math.log10(20e6) + 5.0))
        assert_allclose(linear_to_db(scn.avg_snr_rf), rf_db, atol=1e-9)
        assert_allclose(linear_to_db(scn.avg_snr_rf), 77.588115, atol=1e-5)

        amp = (299792458.0 * 10 ** (110.0 / 20.0)
               / (4.0 * math.pi * 0.275e12 * 50.0)
               * math.exp(-2.8e-4 * 50.0 / 2.0))
        thz_db = 10.0 - 30.0 + 20.0 * math.log10(amp) - linear_to_db(
            noise_power_w(10e9, 5.0)
        )
        assert_allclose(linear_to_db(scn.avg_snr_thz), thz_db, atol=1e-9)
        assert_allclose(linear_to_db(scn.avg_snr_thz), 73.725362, atol=1e-5)

    def test_distance_outside_model_range(self):
        with pytest.raises(ValueError):
            path_gain_rf(0.5, 6e9)
        with pytest.raises(ValueError):
            link_budget(10.0, rf_distance_m=20000.0)

    def test_budget_from_avg_snrs_passthrough(self):
        budget = budget_from_avg_snrs(123.0, 456.0, relay_c=9.0)
        scn = Scenario.uniform(
            2, AlphaMuParams(1.0, 1.0), AlphaMuParams(1.0, 1.0),
            PointingErrorParams(phi=4.0), budget,
        )
        assert scn.avg_snr_rf == 123.0
        assert scn.avg_snr_thz == 456.0
        assert scn.relay_constant == 9.0

    def test_absorption_discounts_thz_gain(self):
        clear = path_gain_thz(50.0, 0.275e12, 110.0, absorption_per_m=0.0)
        hazy = path_gain_thz(50.0, 0.275e12, 110.0, absorption_per_m=2.8e-4)
        assert_allclose(hazy / clear, math.exp(-2.8e-4 * 50.0 / 2.0), rtol=1e-12)

    @given(st.floats(-80.0, 80.0))
    def test_db_round_trip(self, value_db):
        assert_allclose(linear_to_db(db_to_linear(value_db)), value_db,
                        rtol=1e-12, atol=1e-12)

    def test_dbm_to_watt(self):
        assert_allclose(dbm_to_watt(30.0), 1.0, rtol=1e-12)
        assert_allclose(dbm_to_watt(0.0), 1e-3, rtol=1e-12)
