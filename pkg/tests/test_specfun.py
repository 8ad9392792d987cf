import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import wofz

from parascatter.specfun import (SQRT_HALF_PI, erfc_complex, hankel0, pcf, pcf_minus_one,
                                 pcf_neg, pcf_neg_all, pcf_nonneg, pcf_nonneg_all)

from oracles import erfc_taylor, j0_y0_series, pcf_hermite_sum, pcf_mp

finite = st.floats(-5, 5, allow_nan=False)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestNonNegative:
    def test_examples(self):
        assert pcf_nonneg(0, 0) == 1
        assert pcf_nonneg(0, 2) == pytest.approx(math.exp(-1), rel=1e-15)
        assert pcf_nonneg(2, 0) == pytest.approx(-1, rel=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(finite, finite)
    def test_d0_closed_form(self, a, b):
        z = complex(a, b)
        assert abs(pcf_nonneg(0, z) - np.exp(-z * z / 4)) <= 1e-15 * abs(np.exp(-z * z / 4))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 20), st.floats(0, 5), st.floats(0, 2 * math.pi))
    def test_against_direct_hermite_sum(self, m, r, t):
        z = r * complex(math.cos(t), math.sin(t))
        got = pcf_nonneg(m, z)
        want = pcf_hermite_sum(m, z)
        # near a zero of D_m compare against the size of neighbouring orders
        scale = max(abs(want), float(np.max(np.abs(pcf_nonneg_all(m, z)))) * 1e-3, 1e-300)
        assert abs(got - want) <= 1e-12 * scale

    def test_all_rows_match_single(self):
        z = np.array([0.3 + 1j, -2.0, 1.5j])
        table = pcf_nonneg_all(10, z)
        for m in range(11):
            np.testing.assert_allclose(table[m], pcf_nonneg(m, z), rtol=1e-14)


class TestErfc:
    def test_examples(self):
        assert erfc_complex(0) == 1
        assert erfc_complex(1.0) == pytest.approx(erfc_taylor(1.0), rel=1e-13)
        assert erfc_complex(1.0) == pytest.approx(0.157299, abs=1e-6)

    def test_reflection(self):
        z0 = 0.7 + 0.3j
        assert abs(erfc_complex(-z0) - (2 - erfc_complex(z0))) < 1e-14

    @pytest.mark.parametrize("z", [0.2 + 0.1j, 1.3 - 0.8j, -2 + 1j, 3j, 2.5 + 2.5j])
    def test_against_taylor(self, z):
        assert rel(complex(erfc_complex(z)), erfc_taylor(z)) <= 1e-12


class TestNegative:
    def test_d_minus_one_at_zero(self):
        assert abs(pcf_neg(1, 0) - math.sqrt(math.pi / 2)) <= 1e-14

    def test_d_minus_two_at_zero(self):
        assert pcf_neg(2, 0) == pytest.approx(1.0, abs=1e-14)

    def test_d_minus_two_closed_form(self):
        # D_{-2} = D_0 - z D_{-1}
        z = np.array([0.3 + 0.2j, 2 - 2j, 4 * np.exp(-0.25j * np.pi)])
        np.testing.assert_allclose(pcf_neg(2, z), pcf_nonneg(0, z) - z * pcf_minus_one(z), rtol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(finite, finite)
    def test_scaled_faddeeva_identity(self, a, b):
        z = complex(a, b)
        want = np.exp(-z * z / 4) * wofz(1j * z / math.sqrt(2)) * math.sqrt(math.pi / 2)
        assert rel(pcf_neg(1, z), want) <= 1e-10

    @pytest.mark.parametrize("k", [0.1, 1.0, 10.0, 20.0])
    @pytest.mark.parametrize("u", [0.0, 0.5, 2.0, 6.0])
    def test_against_mpmath_on_sigma_ray(self, k, u):
        sigma = math.sqrt(2 * k) * np.exp(-0.25j * np.pi)
        z = sigma * u
        table = pcf_neg_all(40, z)
        for m in (1, 2, 5, 13, 27, 40):
            assert rel(table[m], pcf_mp(-m, z)) <= 1e-11

    def test_overflow_is_signalled(self):
        with pytest.raises(OverflowError):
            pcf_neg_all(400, -60.0 + 0j)

    def test_dispatch(self):
        z = 0.4 + 0.1j
        assert pcf(3, z) == pcf_nonneg(3, z)
        assert pcf(-3, z) == pcf_neg(3, z)


def _recurrence_residual(nu, z):
    a, b, c = pcf(nu + 1, z), pcf(nu, z), pcf(nu - 1, z)
    res = abs(a - z * b + nu * c)
    return res / max(abs(a), abs(z * b), abs(nu * c), 1e-300)


def test_recurrence_example():
    z = 1 + 1j
    for nu in range(-3, 3):
        assert _recurrence_residual(nu, z) <= 1e-10


@settings(max_examples=80, deadline=None)
@given(st.integers(-8, 8), st.floats(0, 5), st.floats(0, 2 * math.pi))
def test_recurrence_property(nu, r, t):
    z = r * complex(math.cos(t), math.sin(t))
    assert _recurrence_residual(nu, z) <= 1e-10


class TestHankel:
    def test_value_at_one(self):
        j0, y0 = j0_y0_series(1.0)
        h = hankel0(1.0)
        assert h == pytest.approx(complex(0.765198, 0.088257), abs=1e-6)
        assert rel(h, complex(j0, y0)) <= 1e-10

    @pytest.mark.parametrize("x", [1e-8, 1e-4, 0.3, 2.0, 7.5, 15.0, 30.0])
    def test_against_power_series(self, x):
        j0, y0 = j0_y0_series(x, dps=80)
        assert rel(hankel0(x), complex(j0, y0)) <= 1e-10

    def test_small_argument(self):
        h = hankel0(1e-8)
        assert h.real == pytest.approx(1.0, abs=1e-12)
        assert h.imag < -10

    def test_asymptotic(self):
        # two-term Hankel expansion; the leading term alone is off by ~1/(8x)
        x = 10.0
        asym = math.sqrt(2 / (math.pi * x)) * np.exp(1j * (x - math.pi / 4)) * (1 - 1j / (8 * x))
        assert abs(hankel0(x) - asym) <= 0.01 * abs(asym)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            hankel0(x)


def test_sqrt_half_pi():
    assert SQRT_HALF_PI == pytest.approx(math.sqrt(math.pi / 2), rel=1e-16)
