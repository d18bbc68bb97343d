import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erfcx

from liqfuel.errors import DomainError, NumericError
from liqfuel.special import (
    PhiEval,
    hermite,
    hermite_quotient_probe,
    log_hermite,
    phi,
    relative_turan_margin,
    turan_margin,
)

mp.mp.dps = 30


def mp_log_hermite(nu, x):
    return float(mp.log(mp.hermite(mp.mpf(nu), mp.mpf(float(x)))))


@pytest.mark.parametrize("nu", [-0.05, -0.1, -0.5, -1.1, -2.1, -3.7, -5.2])
def test_log_hermite_matches_mpmath(nu):
    x = np.array([-60.0, -25.0, -7.5, -1.0, -0.3, 0.0, 0.4, 2.0, 9.0, 31.0, 50.0])
    got = log_hermite(nu, x)
    want = np.array([mp_log_hermite(nu, v) for v in x])
    # compare values H, not logs, in relative terms
    assert np.max(np.abs(np.expm1(got - want))) < 1e-11


def test_order_minus_one_is_scaled_erfc():
    x = np.linspace(-20, 20, 81)
    want = 0.5 * math.sqrt(math.pi) * erfcx(x)
    assert np.allclose(hermite(-1.0, x), want, rtol=1e-11, atol=0)


def test_scalar_and_shape():
    assert np.ndim(log_hermite(-0.3, 0.5)) == 0
    assert log_hermite(-0.3, np.zeros((2, 3))).shape == (2, 3)


def test_nonnegative_order_rejected():
    with pytest.raises(DomainError):
        log_hermite(0.0, 1.0)
    with pytest.raises(DomainError):
        log_hermite(0.5 + 1j, 1.0)


@given(nu=st.floats(-4.5, -1.05), x=st.floats(-12, 12))
def test_three_term_recurrence(nu, x):
    # H_{nu+1} = 2x H_nu - 2 nu H_{nu-1}; all three orders negative
    h0, h1, hm = hermite(nu, x), hermite(nu + 1, x), hermite(nu - 1, x)
    rhs = 2 * x * h0 - 2 * nu * hm
    scale = abs(2 * x * h0) + abs(2 * nu * hm)
    assert abs(h1 - rhs) <= 1e-9 * scale


@pytest.mark.parametrize("nu", [-0.2 + 1.5j, -0.1 + 4.0j, -1.3 - 2.0j])
def test_complex_order_matches_mpmath(nu):
    for x in (-3.0, 0.0, 1.7, 6.0):
        got = complex(np.exp(log_hermite(nu, x)))
        want = complex(mp.hermite(mp.mpc(nu.real, nu.imag), x))
        assert abs(got - want) <= 1e-9 * abs(want)


def test_large_imaginary_order_raises_with_residual():
    with pytest.raises(NumericError) as exc:
        log_hermite(-0.1 + 40.0j, np.array([0.0, 2.0]))
    assert exc.value.residual is not None


@pytest.fixture(scope="module")
def cfg():
    return PhiEval(0.1, 1.0, 1.0)


def test_phi_orders_and_domain(cfg):
    x = np.linspace(-3, 3, 7)
    assert np.all(phi(cfg, 0, x) > 0)
    with pytest.raises(DomainError):
        phi(cfg, 4, x)
    with pytest.raises(DomainError):
        PhiEval(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        turan_margin(cfg, 3, x)


@given(delta=st.floats(0.02, 3.0), beta=st.floats(0.3, 3.0), sh=st.floats(0.3, 2.0),
       rho=st.floats(-1, 1), y=st.floats(-6, 6))
def test_eigenfunction_solves_generator(delta, beta, sh, rho, y):
    c = PhiEval(delta, beta, sh, sigma=0.3, rho=rho)
    p0, p1, p2 = (c(n, y) for n in range(3))
    terms = np.array([0.5 * sh**2 * p2, (0.3 * rho * sh - beta * y) * p1, -delta * p0])
    assert abs(terms.sum()) <= 1e-9 * np.abs(terms).max()


@given(y=st.floats(-5, 5))
def test_derivative_matches_finite_difference(cfg, y):
    h = 1e-5
    for n in range(3):
        fd = (cfg(n, y + h) - cfg(n, y - h)) / (2 * h)
        assert fd == pytest.approx(cfg(n + 1, y), rel=1e-7)


@given(delta=st.floats(0.01, 5.0), beta=st.floats(0.2, 5.0), x=st.floats(-10, 10))
def test_turan_margins_positive(delta, beta, x):
    c = PhiEval(delta, beta, 1.0)
    for n in (1, 2):
        assert turan_margin(c, n, x) > 0
        assert 0 < relative_turan_margin(c, n, x) < 1


@given(y=st.floats(-8, 8))
def test_eigenfunction_increasing_convex(cfg, y):
    assert cfg(0, y) > 0 and cfg(1, y) > 0 and cfg(2, y) > 0


def test_quotient_probe(cfg):
    rep = hermite_quotient_probe(-0.1, np.linspace(-5, 5, 41))
    assert rep.quotient.shape == (41,)
    assert np.all(np.isfinite(rep.quotient) & (rep.quotient > 0))
    assert rep.decreasing == bool(np.all(np.diff(rep.quotient) < 0))
    with pytest.raises(DomainError):
        hermite_quotient_probe(-0.1, [1.0, 0.0])
