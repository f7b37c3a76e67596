import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from adsdyn.errors import DomainError
from adsdyn.specfun import (EULER_GAMMA, F0, PI_CUBED, bessel_family, bessel_i2_prime,
                            bessel_k2, bessel_k2_prime, constants, entire_parts, k2_series)


def k2_integral(x):
    """K2(x) = int_0^inf exp(-x cosh t) cosh 2t dt."""
    val, _ = integrate.quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(2 * t), 0, 10.0,
                            epsabs=0, epsrel=1e-13, limit=200)
    return val


def test_k2_at_one_matches_integral_representation():
    assert bessel_k2(1.0) == pytest.approx(k2_integral(1.0), rel=1e-11)
    assert bessel_k2(1.0) == pytest.approx(1.624839, abs=1e-6)


@pytest.mark.parametrize("x", [1e-3, 0.05, 0.3, 1.0, 1.999, 2.0, 2.001, 3.7, 10.0, 40.0])
def test_k2_matches_mpmath(x):
    ref = float(mpmath.besselk(2, x))
    assert bessel_k2(x) == pytest.approx(ref, rel=1e-12)


def test_k2_leading_small_argument():
    for x in (1e-4, 1e-5, 1e-6):
        assert bessel_k2(x) * x * x / 2 == pytest.approx(1.0, abs=1e-7)


def test_k2_large_argument_asymptotics():
    x = 400.0
    assert bessel_k2(x) * math.exp(x) * math.sqrt(2 * x / math.pi) == pytest.approx(1.0, abs=1e-2)
    # next order 1 + (4 nu^2 - 1)/(8x) pins the approach
    assert bessel_k2(x) * math.exp(x) * math.sqrt(2 * x / math.pi) == pytest.approx(
        1 + 15 / (8 * x), rel=1e-5)


def test_series_crossover_agrees():
    lo, hi = bessel_k2(np.array([2.0 - 1e-12])), bessel_k2(np.array([2.0 + 1e-12]))
    assert abs(lo[0] - hi[0]) / hi[0] <= 1e-10


def test_f0_closed_form():
    assert F0 == (4 * math.log(2) + 3 - 4 * EULER_GAMMA) / 32
    assert F0 == pytest.approx(0.1082414, abs=1e-7)
    f, _ = entire_parts(0.0)
    assert f == pytest.approx(F0, rel=1e-15)
    assert k2_series(1e-8).f_entire_at == pytest.approx(F0, rel=1e-12)


def test_reassembly_at_point():
    d = k2_series(0.3)
    assert d.reassemble() == pytest.approx(bessel_k2(0.3), rel=1e-9)


@given(st.floats(min_value=1e-6, max_value=0.5))
def test_reassembly_on_small_interval(x):
    ref = float(mpmath.besselk(2, x))
    assert k2_series(x).reassemble() == pytest.approx(ref, rel=1e-9)


@given(st.floats(min_value=0.1, max_value=10.0))
def test_wronskian(x):
    w = (bessel_family("I2", x) * bessel_k2_prime(x) - bessel_i2_prime(x) * bessel_k2(x))
    assert w == pytest.approx(-1.0 / x, rel=1e-8)


def test_family_values():
    assert bessel_family("Y2", 1.0) == pytest.approx(-1.650683, abs=1e-6)
    assert bessel_family("J2", 0.01) / (0.01 ** 2 / 8) == pytest.approx(1.0, abs=1e-4)
    x = 500.0
    assert special.ive(2, x) * math.sqrt(2 * math.pi * x) == pytest.approx(1.0, abs=1e-2)
    assert bessel_family("I2", 50.0) * math.exp(-50.0) * math.sqrt(100 * math.pi) == pytest.approx(
        1.0, abs=0.05)


def test_constants():
    c = constants()
    assert c.euler_gamma == pytest.approx(0.5772156649, abs=1e-10)
    assert c.pi_cubed == pytest.approx(31.00627668, abs=1e-8)
    assert c.pi_cubed == PI_CUBED
    assert c.eigen_equation_shift == pytest.approx(1.7318630, abs=1e-7)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        bessel_k2(bad)
    with pytest.raises(DomainError):
        bessel_family("J2", bad)


def test_k2_series_restricted():
    with pytest.raises(DomainError):
        k2_series(1.5)
    with pytest.raises(DomainError):
        bessel_family("K7", 1.0)


@given(st.floats(min_value=1e-3, max_value=50.0))
def test_pure(x):
    assert bessel_k2(x) == bessel_k2(x)
    assert np.asarray(bessel_k2(np.array([x])))[0] == bessel_k2(x)
