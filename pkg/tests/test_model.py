import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from liqfuel.errors import DomainError
from liqfuel.model import (
    NOT_CHECKABLE,
    VERIFIED,
    VIOLATED,
    ImpactFunction,
    ModelParams,
    check_assumptions,
    k_fn,
    k_prime,
    load_params,
    params_from_dict,
)
from liqfuel.special import turan_margin

from .conftest import FIG1


def test_delta_and_shift(params):
    assert params.delta == pytest.approx(0.1)
    assert params.replace(rho=0.5).drift_shift == pytest.approx(0.05)


@pytest.mark.parametrize("bad", [dict(beta=0.0), dict(sigma_hat=-1.0), dict(sigma=0.0), dict(rho=1.5),
                                 dict(s_bar0=0.0), dict(gamma=math.nan), dict(beta=True)])
def test_param_validation(bad):
    with pytest.raises(DomainError):
        ModelParams(**{**FIG1, **bad})


def test_eigenfunction_refuses_nonpositive_delta():
    p = ModelParams(**{**FIG1, "mu": 0.2})
    assert p.delta < 0
    with pytest.raises(DomainError):
        p.eigenfunction()


def test_k_at_zero(params, f_exp):
    assert k_fn(params, f_exp, 0.0) == pytest.approx(-0.6, abs=1e-15)


@given(y=st.floats(-10, 10), h=st.floats(0.01, 2))
def test_k_affine_decreasing_for_exponential(params, f_exp, y, h):
    assert k_fn(params, f_exp, y + h) - k_fn(params, f_exp, y) == pytest.approx(-h, rel=1e-9)
    assert k_prime(params, f_exp, y) == pytest.approx(-1.0)


def test_k_negative_at_y_inf(params, f_exp, boundary):
    assert k_fn(params, f_exp, boundary.y_inf) < 0


def test_k_prime_matches_finite_difference():
    f = ImpactFunction.analytic(lambda y: np.exp(y) + y * y + 3, lambda y: np.exp(y) + 2 * y,
                                lambda y: np.exp(y) + 2, lambda y: np.exp(y), (-5, 5))
    p = ModelParams(**FIG1)
    for y in (-2.0, 0.3, 1.7):
        fd = (k_fn(p, f, y + 1e-6) - k_fn(p, f, y - 1e-6)) / 2e-6
        assert k_prime(p, f, y) == pytest.approx(fd, rel=1e-6)


def test_integral_closed_form_and_quadrature():
    f = ImpactFunction.exponential(2.0)
    assert f.integral(-1.0, 0.5) == pytest.approx((math.exp(1.0) - math.exp(-2.0)) / 2, rel=1e-15)
    g = ImpactFunction.analytic(np.exp, np.exp, np.exp, np.exp, (-3, 3))
    assert g.integral(-1.0, 0.5) == pytest.approx(quad(math.exp, -1, 0.5)[0], rel=1e-12)
    with pytest.raises(DomainError):
        g(4.0)


def test_fig1_all_verified(params, f_exp):
    rep = check_assumptions(params, f_exp)
    assert rep.ok
    assert all(s.status == VERIFIED for s in rep.items.values())
    assert set(rep.items) == {"i", "ii", "iii", "iv", "v", "vi"}
    # grid reaches y_inf - 5 .. y0 + 5
    assert rep.grid[0] <= -5.3 and rep.grid[1] >= 6.2


def test_gamma_below_mu_violates_i(f_exp):
    rep = check_assumptions(ModelParams(**{**FIG1, "mu": 0.3}), f_exp)
    assert rep.items["i"].status == VIOLATED
    assert rep.items["i"].witness["delta"] < 0
    assert not rep.ok


def test_huge_lambda_unusable(params):
    rep = check_assumptions(params, ImpactFunction.exponential(50.0))
    assert not rep.ok
    assert rep.items["vi"].status in (NOT_CHECKABLE, VIOLATED)
    assert rep.items["vi"].witness is not None
    json.loads(rep.to_json())


def test_violation_carries_two_sides():
    # f'/f increasing violates (ii) and (iii)
    f = ImpactFunction.analytic(lambda y: np.exp(y * y), lambda y: 2 * y * np.exp(y * y),
                                lambda y: (2 + 4 * y * y) * np.exp(y * y),
                                lambda y: (12 * y + 8 * y**3) * np.exp(y * y), (0.1, 3))
    rep = check_assumptions(ModelParams(**FIG1), f)
    w = rep.items["ii"].witness
    assert rep.items["ii"].status == VIOLATED and {"y", "lhs", "rhs"} <= set(w)


@given(y=st.floats(-10, 10))
def test_checker_agrees_with_turan_sign(params, y):
    # for exponential f (ii) and (iii) are the Turan margins
    phi = params.eigenfunction()
    assert turan_margin(phi, 1, y) > 0 and turan_margin(phi, 2, y) > 0
    rep = check_assumptions(params, ImpactFunction.exponential(1.0), np.linspace(y - 0.1, y + 0.1, 5))
    assert rep.items["ii"].status == VERIFIED and rep.items["iii"].status == VERIFIED


def test_schema_roundtrip(tmp_path, params, f_exp):
    d = {**params.to_dict(), "impact": f_exp.to_dict()}
    p = tmp_path / "p.json"
    p.write_text(json.dumps(d))
    p2, f2 = load_params(p)
    assert p2 == params and f2.lam == 1.0


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("beta"),
    lambda d: d.update(extra=1),
    lambda d: d.update(beta="1"),
    lambda d: d.update(impact={"kind": "power", "lambda": 1}),
    lambda d: d.update(impact={"kind": "exponential", "lambda": 1, "x": 2}),
])
def test_schema_rejections(params, mutate):
    d = {**params.to_dict(), "impact": {"kind": "exponential", "lambda": 1.0}}
    mutate(d)
    with pytest.raises(DomainError):
        params_from_dict(d)
