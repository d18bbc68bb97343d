import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liqfuel.boundary import (
    PastingCoefficients,
    block_size,
    boundary_inverse,
    find_y0,
    find_y_inf,
    ode_rhs_closed_form,
    solve_boundary,
)
from liqfuel.errors import AssumptionError, DomainError
from liqfuel.model import ImpactFunction, ModelParams

from .conftest import FIG1

# mpmath at 30 digits, scripts/oracle_boundary.py
Y0_REF = 1.2570065952261867892
YINF_REF = -0.3095084792382275099
THETA_REF = {1.0: 0.36446360680463902882, 0.5: 2.1873179772611512535, 0.0: 8.3452514149458285962,
             -0.2: 16.350737808675263274, -0.3: 36.000369689140308943}


def test_endpoints_match_oracle(params, f_exp):
    assert find_y0(params, f_exp) == pytest.approx(Y0_REF, rel=1e-14)
    assert find_y_inf(params, f_exp) == pytest.approx(YINF_REF, rel=1e-14)


def test_endpoint_defining_equations(params, f_exp, boundary):
    phi = params.eigenfunction()
    assert phi.ratio(1, boundary.y0) == pytest.approx(1.0, abs=1e-12)
    assert phi.ratio(2, boundary.y_inf) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("y", sorted(THETA_REF))
def test_inverse_matches_oracle(boundary, y):
    assert boundary_inverse(boundary, y) == pytest.approx(THETA_REF[y], rel=1e-12)
    assert boundary.inverse_interp(y) == pytest.approx(THETA_REF[y], rel=1e-8)


def test_shape(boundary):
    th = np.linspace(0, 50, 5001)
    y = boundary(th)
    assert np.all(np.diff(y) < 0)
    assert np.all(y > boundary.y_inf) and np.all(y <= boundary.y0)
    assert boundary(0.0) == boundary.y0
    assert boundary.slope(0.0) == pytest.approx(-1.0, abs=1e-12)


def test_refuses_extrapolation(boundary):
    with pytest.raises(DomainError):
        boundary(50.5)
    with pytest.raises(DomainError):
        boundary(-1e-3)


def test_theta_max_zero_single_knot(params, f_exp):
    b = solve_boundary(params, f_exp, 0.0)
    assert b.theta_knots.size == 1 and b(0.0) == b.y0


def test_assumption_failure_refused(f_exp):
    with pytest.raises(AssumptionError):
        solve_boundary(ModelParams(**{**FIG1, "mu": 0.5}), f_exp, 1.0)


@given(u=st.floats(1e-4, 1 - 1e-4))
def test_two_ode_forms_agree(params, f_exp, boundary, u):
    y = boundary.y_inf + u * (boundary.y0 - boundary.y_inf)
    a = PastingCoefficients(params, f_exp).rhs(y)
    b = ode_rhs_closed_form(params, f_exp, y)
    assert a == pytest.approx(b, rel=1e-10)
    assert a < 0


def test_pasting_coefficients_at_origin(params, f_exp, boundary):
    pc = PastingCoefficients(params, f_exp)
    m1, m2, _ = pc.all(boundary.y0)
    assert abs(m1) < 1e-13
    # C'(0) = M2(y0) gives V_theta(y0, 0) = Phi(y0) M2(y0) = f(y0)
    assert params.eigenfunction()(0, boundary.y0) * m2 == pytest.approx(f_exp(boundary.y0), rel=1e-12)


def test_slope_interpolant_vs_exact(boundary):
    th = np.linspace(0.1, 49.9, 97)
    assert np.allclose(boundary.slope(th, exact=False), boundary.slope(th), rtol=1e-6, atol=1e-9)


def test_block_size_solves_pasting_equation(boundary):
    th = np.array([10.0, 20.0, 40.0])
    y = boundary(th) + np.array([0.3, 1.0, 5.0])
    d = block_size(boundary, y, th)
    assert np.all((d > 0) & (d < th))
    assert np.allclose(y - d, boundary(th - d), atol=1e-12)


def test_csv_roundtrip(tmp_path, boundary):
    p = tmp_path / "b.csv"
    boundary.to_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["theta", "y", "dy_dtheta"]
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back[:, 0], boundary.theta_knots)
    assert np.array_equal(back[:, 1], boundary.y_values)


def test_rho_shift_for_exponential(params, f_exp, boundary):
    b5 = solve_boundary(params.replace(rho=0.5), f_exp, 50.0, check=False)
    th = np.linspace(0, 50, 501)
    shift = params.sigma * 0.5 * params.sigma_hat / params.beta
    assert np.max(np.abs(b5(th) - boundary(th) - shift)) < 1e-6


def test_generic_impact_boundary(params):
    # exp written as an analytic function follows the same curve
    f = ImpactFunction.analytic(np.exp, np.exp, np.exp, np.exp, (-8.0, 8.0))
    b = solve_boundary(params, f, 5.0)
    ref = solve_boundary(params, ImpactFunction.exponential(1.0), 5.0)
    th = np.linspace(0, 5, 51)
    assert np.allclose(b(th), ref(th), atol=1e-9)
