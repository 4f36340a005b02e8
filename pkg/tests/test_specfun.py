"""Mellin-Barnes evaluator tests: closed-form reductions, contour
independence, separability, and structural validation."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.special import gamma as scipy_gamma

from thzrelay.channels import AlphaMuParams, PointingErrorParams, thz_snr_kernel
from thzrelay.specfun import (
    ContourError,
    ContourSpec,
    DecayError,
    EmptyContourStripError,
    FoxHBivariateSpec,
    FoxHUnivariateSpec,
    GammaTriple,
    fox_h_bivariate,
    fox_h_univariate,
    log_gamma_complex,
    propose_contour_univariate,
)

THZ = AlphaMuParams(2.0, 2.6)
POINTING = PointingErrorParams(phi=4.0)
# tail order of the THz kernel: phi/alpha - mu
C_ORDER = POINTING.phi / THZ.alpha - THZ.mu


def beta_kernel(a, b):
    # Gamma(b - s) Gamma(a + s) pairs with Gamma(a+b) z^b / (1+z)^(a+b)
    return FoxHUnivariateSpec(numerator=(GammaTriple(b, -1.0), GammaTriple(a, 1.0)))


def thz_closed_form(y):
    return float(y**C_ORDER * mpmath.gammainc(-C_ORDER, y))


def thz_residue_series(y, terms=60):
    # poles of Gamma(-s) at s = k plus the single pole of Gamma(c - s) at s = c
    total = float(mpmath.gamma(-C_ORDER)) * y**C_ORDER
    for k in range(terms):
        total += (-1.0) ** k * y**k / (math.factorial(k) * (C_ORDER - k))
    return total


class TestLogGammaComplex:
    @pytest.mark.parametrize("z", [0.3 + 4.0j, -2.4 + 0.7j, 5.0 - 9.0j, 1.0 + 0.0j])
    def test_matches_mpmath(self, z):
        expected = complex(mpmath.loggamma(z))
        assert_allclose(log_gamma_complex(z), expected, rtol=1e-12)

    def test_vectorized(self):
        zs = np.array([0.5 + 1.0j, 2.0 + 2.0j])
        out = log_gamma_complex(zs)
        assert out.shape == zs.shape


class TestStructuralValidation:
    def test_contour_requires_finite_abscissa(self):
        with pytest.raises(ContourError):
            ContourSpec(math.nan)

    def test_contour_rejects_tiny_node_count(self):
        with pytest.raises(ContourError):
            ContourSpec(0.0, nodes_per_axis=8)

    def test_contour_rejects_nonpositive_height(self):
        with pytest.raises(ContourError):
            ContourSpec(0.0, half_height=0.0)

    def test_insufficient_decay_rejected(self):
        # one rising numerator factor against one rising denominator factor
        # leaves zero net decay along the contour
        with pytest.raises(DecayError):
            spec = FoxHUnivariateSpec(
                numerator=(GammaTriple(0.5, 1.0),),
                denominator=(GammaTriple(2.5, 1.0),),
            )
            fox_h_univariate(spec, 1.0)

    def test_empty_strip_univariate(self):
        # poles demand sigma < 0.3 and sigma > 0.5 simultaneously
        with pytest.raises(EmptyContourStripError):
            spec = FoxHUnivariateSpec(
                numerator=(GammaTriple(0.3, -1.0), GammaTriple(-0.5, 1.0)),
            )
            fox_h_univariate(spec, 1.0)


class TestUnivariateClosedForms:
    @pytest.mark.parametrize(
        "y, expected",
        [
            (0.3, 1.571453199565154),
            (1.0, 0.2937573587394031),
            (5.0, 0.001260964366878043),
        ],
    )
    def test_thz_kernel_golden(self, y, expected):
        spec = thz_snr_kernel(THZ, POINTING)
        hv = fox_h_univariate(spec, y)
        assert_allclose(hv.value, expected, rtol=1e-10)
        assert_allclose(hv.value, thz_closed_form(y), rtol=1e-10)

    @pytest.mark.parametrize("y", [0.1, 0.7, 2.0, 5.0])
    def test_thz_kernel_residue_series(self, y):
        spec = thz_snr_kernel(THZ, POINTING)
        hv = fox_h_univariate(spec, y)
        assert_allclose(hv.value, thz_residue_series(y), rtol=1e-9)

    @pytest.mark.parametrize(
        "a, b, x",
        [(0.7, 1.2, 0.6), (0.9, 1.5, 2.3), (1.3, 0.4, 0.05)],
    )
    def test_beta_kernel_reduction(self, a, b, x):
        hv = fox_h_univariate(beta_kernel(a, b), x)
        closed = scipy_gamma(a + b) * x**b / (1.0 + x) ** (a + b)
        assert_allclose(hv.value, closed, rtol=1e-12)


class TestContourIndependence:
    @pytest.mark.parametrize("abscissa", [-3.0, -8.0])
    def test_thz_kernel_explicit_contours(self, abscissa):
        spec = thz_snr_kernel(THZ, POINTING)
        base = fox_h_univariate(spec, 1.0)
        moved = fox_h_univariate(spec, 1.0, contour=ContourSpec(abscissa))
        assert_allclose(moved.value, base.value, rtol=1e-6)

    @given(st.floats(min_value=-9.0, max_value=-2.8))
    def test_thz_kernel_random_abscissa(self, abscissa):
        spec = thz_snr_kernel(THZ, POINTING)
        base = fox_h_univariate(spec, 1.0)
        moved = fox_h_univariate(spec, 1.0, contour=ContourSpec(abscissa))
        assert_allclose(moved.value, base.value, rtol=1e-6)

    def test_proposed_contour_is_valid_strip_point(self):
        spec = thz_snr_kernel(THZ, POINTING)
        contour = propose_contour_univariate(spec)
        # strip of Gamma(c - s) Gamma(-s) / Gamma(1 + c - s): sigma < c
        assert contour.abscissa_s1 < C_ORDER


COUPLED = FoxHBivariateSpec(
    numerator_s1=(GammaTriple(1.2, -1.0, 0.0), GammaTriple(0.7, 1.0, 0.0)),
    numerator_s2=(GammaTriple(1.5, 0.0, -1.0), GammaTriple(0.9, 0.0, 1.0)),
    numerator_joint=(GammaTriple(3.0, 0.5, 0.5),),
)


class TestBivariate:
    @pytest.mark.parametrize("x, y", [(0.6, 1.7), (2.3, 0.4)])
    def test_separable_spec_factorizes(self, x, y):
        spec = FoxHBivariateSpec(
            numerator_s1=(GammaTriple(1.2, -1.0, 0.0), GammaTriple(0.7, 1.0, 0.0)),
            numerator_s2=(GammaTriple(1.5, 0.0, -1.0), GammaTriple(0.9, 0.0, 1.0)),
        )
        joint = fox_h_bivariate(spec, x, y)
        h1 = fox_h_univariate(beta_kernel(0.7, 1.2), x)
        h2 = fox_h_univariate(beta_kernel(0.9, 1.5), y)
        assert_allclose(joint.value, h1.value * h2.value, rtol=1e-8)

    @pytest.mark.parametrize(
        "contour",
        [
            ContourSpec(0.1, 0.2),
            ContourSpec(0.3, 0.35),
            ContourSpec(0.45, 0.1),
            ContourSpec(-0.4, 0.9, nodes_per_axis=2048),
        ],
    )
    def test_coupled_contour_independence(self, contour):
        base = fox_h_bivariate(COUPLED, 0.9, 1.1)
        moved = fox_h_bivariate(COUPLED, 0.9, 1.1, contour=contour)
        assert_allclose(moved.value, base.value, rtol=1e-6)

    def test_error_estimate_present(self):
        hv = fox_h_bivariate(COUPLED, 0.9, 1.1)
        assert math.isfinite(hv.error) and hv.error >= 0.0
        assert abs(hv.value - 0.1324350155274) < 1e-9
