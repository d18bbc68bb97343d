"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are echoed in the terminal
summary.  The Monte Carlo criteria (6, 7, 10) share three runs of 1e5 paths
and take most of the hour this module needs on one core.  The three
runs draw their impact noise on the common grid dt/4, so the refinement
comparison sees the discretisation effect rather than independent noise.
"""

import math
import time

import numpy as np
import pytest

from liqfuel.boundary import boundary_inverse, ode_rhs_closed_form, solve_boundary
from liqfuel.liquidation import (
    euler_lagrange_residual,
    expected_proceeds_boundary,
    laplace_inverse_local_time,
    random_bumps,
    tau_distribution,
)
from liqfuel.model import ImpactFunction, ModelParams
from liqfuel.simulate import SimConfig, estimate_laplace_mc, estimate_proceeds_mc, martingale_diagnostic, run_paths
from liqfuel.special import PhiEval, turan_margin
from liqfuel.value import SELL1, ValueFunction

from .conftest import ACCEPTANCE_LINES, FIG1

THETA0 = 50.0
N_PATHS = 100_000
DT = 1e-3
ELLS = (1.0, 5.0, 10.0)
CHECKPOINTS = (0.0, 5.0, 10.0, 20.0, 40.0, 80.0)
FINE = DT / 4


def record(num: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def mc(params, f_exp, boundary):
    """Lazily computed runs from the boundary at Theta0 = 50, keyed by dt."""
    runs = {}

    def get(dt):
        if dt not in runs:
            cps = CHECKPOINTS if dt == DT else ()
            cfg = SimConfig(dt=dt, n_paths=N_PATHS, substeps=round(dt / FINE))
            runs[dt] = run_paths(params, f_exp, boundary, boundary(THETA0), THETA0, cfg, ells=ELLS, checkpoints=cps)
        return runs[dt]

    return get


def test_criterion_01_turan_suite():
    t0 = time.perf_counter()
    x = np.arange(-10.0, 10.0 + 1e-9, 0.05)
    bad, worst = 0, math.inf
    for ratio in (0.05, 0.1, 0.5, 1.0, 2.0):
        for rho in (-0.5, 0.0, 0.5):
            phi = PhiEval(ratio * FIG1["beta"], FIG1["beta"], FIG1["sigma_hat"], FIG1["sigma"], rho, 1e-10)
            for n in (1, 2):
                m = turan_margin(phi, n, x)
                bad += int(np.sum(~(m > 0)))
                worst = min(worst, float(np.min(m)))
    el = time.perf_counter() - t0
    record(1, bad == 0 and el < 60, f"Turan margins, {bad} violations, min margin {worst:.3e}, {el:.1f} s")


def test_criterion_02_boundary(params, f_exp):
    t0 = time.perf_counter()
    b = solve_boundary(params, f_exp, THETA0)
    th = np.linspace(0.0, THETA0, 5001)
    y = b(th)
    mono = bool(np.all(np.diff(y) < 0))
    inside = bool(np.all(y > b.y_inf) and np.all(y <= b.y0))
    ys = np.linspace(b(THETA0), b.y0, 12)[1:-1]
    rt = max(abs(boundary_inverse(b, v) - b.inverse_interp(v)) / b.inverse_interp(v) for v in ys)
    res, lhs, _ = euler_lagrange_residual(b, np.linspace(THETA0 / 200, THETA0, 200))
    el_rel = float(np.max(np.abs(res) / np.abs(lhs)))
    el = time.perf_counter() - t0
    ok = mono and inside and rt < 1e-6 and el_rel < 1e-6 and el < 10
    record(2, ok, f"boundary decreasing={mono} in-range={inside} roundtrip {rt:.1e} EL {el_rel:.1e}, {el:.1f} s")


def test_criterion_03_ode_forms(params, f_exp, boundary):
    rng = np.random.default_rng(3)
    y = rng.uniform(boundary.y_inf, boundary.y0, 100)
    a = np.asarray(boundary.coeffs.rhs(y))
    c = np.asarray(ode_rhs_closed_form(params, f_exp, y))
    worst = float(np.max(np.abs(a - c) / np.abs(c)))
    record(3, worst < 1e-8, f"closed-form vs pasting-ratio slope, worst relative {worst:.1e} at 100 points")


def test_criterion_04_smooth_pasting(vf):
    worst = max(max(abs(r) for r in vf.check_smooth_pasting(t)) for t in (0.0, 0.5, 1.0, 5.0, 10.0, 25.0, 50.0))
    record(4, worst < 1e-8, f"smooth pasting, worst relative residual {worst:.1e}")


def test_criterion_05_hjb_grid(boundary):
    t0 = time.perf_counter()
    vf = ValueFunction(boundary)
    yg = np.linspace(boundary.y_inf - 2, boundary.y0 + 52, 200)
    tg = np.linspace(0.0, THETA0, 200)
    rep = vf.check_variational(yg, tg, eq_tol=1e-8, sign_tol=1e-7)
    el = time.perf_counter() - t0
    w = rep.worst
    record(5, rep.ok and el < 300, f"HJB on 200x200, {len(rep.offenders)} offenders, LV in wait "
           f"{w['lv_wait_abs_rel']:.1e}, gap in sell {w['gap_sell_abs_rel']:.1e}, {el:.1f} s")


def test_criterion_06_proceeds_mc(params, f_exp, boundary, vf, mc):
    cf = params.s_bar0 * float(vf.value(boundary(THETA0), THETA0))
    main = estimate_proceeds_mc(params, f_exp, boundary, None, None, None, run=mc(DT))
    z_main = (main.estimate - cf) / main.stderr
    main_ok = abs(z_main) < 3 and main.n_flagged == 0
    # refinement on the coupled runs, price noise integrated out
    dts = (DT, DT / 2, DT / 4)
    est = {dt: estimate_proceeds_mc(params, f_exp, boundary, None, None, None, run=mc(dt), estimator="conditional")
           for dt in dts}
    gap = abs(est[DT].estimate - est[DT / 2].estimate)
    half = gap < math.hypot(est[DT].stderr, est[DT / 2].stderr)
    d = mc(DT).L_cond - mc(DT / 2).L_cond
    e1, e4 = abs(est[DT].estimate - cf), abs(est[DT / 4].estimate - cf)
    both_out = e1 > est[DT].stderr / 3 and e4 > est[DT / 4].stderr / 3
    closer = e4 < e1 if both_out else True
    zs = ", ".join(f"{dt:g}: {est[dt].estimate:.5f}" for dt in dts)
    record(6, main_ok and half and closer,
           f"closed form {cf:.6f}; dt={DT:g} MC {main.estimate:.5f} +- {main.stderr:.5f} (z={z_main:+.2f}); "
           f"conditional {zs}; |dt - dt/2| {gap:.5f} (paired se {d.std() / math.sqrt(d.size):.5f}) < "
           f"{math.hypot(est[DT].stderr, est[DT / 2].stderr):.5f}; dt/4 closer={'n/a' if not both_out else closer}")


def test_criterion_07_laplace_and_cdf(params, boundary, mc):
    run = mc(DT)
    alpha = params.delta
    parts, ok = [], True
    for ell in ELLS:
        e = estimate_laplace_mc(alpha, ell, run=run)
        cf = laplace_inverse_local_time(boundary, alpha, ell, theta0=THETA0)
        z = (e.estimate - cf) / e.stderr
        ok &= abs(z) < 3
        parts.append(f"l={ell:g} z={z:+.2f}")
    tau = np.sort(run.tau[~run.flagged])
    n = tau.size
    t = np.quantile(tau, np.linspace(0.002, 0.998, 60))
    d = tau_distribution(boundary, THETA0, t_grid=t, tol=1e-5)
    emp = np.searchsorted(tau, t, side="right") / n
    band = float(np.max(np.sqrt(emp * (1 - emp) / n)))
    ks = float(np.max(np.abs(d.cdf - emp)))
    ok &= ks <= 0.01 + 3 * band
    record(7, ok, f"Laplace {', '.join(parts)}; tau CDF KS {ks:.4f} <= {0.01 + 3 * band:.4f}")


def test_criterion_08_rho_shift(params, f_exp):
    th = np.linspace(0.0, THETA0, 2001)
    b0 = solve_boundary(params.replace(rho=0.0), f_exp, THETA0)
    b5 = solve_boundary(params.replace(rho=0.5), f_exp, THETA0)
    gap = float(np.max(np.abs(b5(th) - b0(th) - params.sigma * 0.5 * params.sigma_hat / params.beta)))
    record(8, gap < 1e-6, f"rho shift sup error {gap:.1e}")


def test_criterion_09_bumps(boundary):
    curves, rejected = random_bumps(boundary, THETA0, 10, eps=1e-2, rng=2024)
    e0 = expected_proceeds_boundary(boundary, THETA0)
    gaps = [e0 - expected_proceeds_boundary(c, THETA0) for c in curves]
    ok = len(curves) == 10 and all(g > 0 for g in gaps)
    record(9, ok, f"{len(curves)} bumps ({rejected} redrawn), smallest loss {min(gaps):.3e}")


def test_criterion_10_martingale(params, f_exp, boundary, vf, mc):
    opt = martingale_diagnostic("optimal", CHECKPOINTS, vf, params, f_exp, boundary, boundary(THETA0), THETA0,
                                SimConfig(dt=DT, n_paths=N_PATHS), run=mc(DT))
    y_s1 = boundary(THETA0) + 1.0
    assert vf.classify(y_s1, THETA0) == SELL1
    nt = martingale_diagnostic("never-trade", CHECKPOINTS, vf, params, f_exp, boundary, y_s1, THETA0,
                               SimConfig(dt=DT, n_paths=20_000, seed=9))
    zo = " ".join(f"{v:+.2f}" for v in opt.z[1:])
    zn = " ".join(f"{v:+.1f}" for v in nt.z[1:])
    record(10, opt.flat and nt.decreasing, f"optimal z [{zo}] flat={opt.flat}; never-trade z [{zn}]")


def test_reference_params_are_fig1_json():
    import json
    from pathlib import Path

    raw = json.loads((Path(__file__).parents[1] / "configs" / "fig1.json").read_text())
    assert ModelParams(**{k: raw[k] for k in FIG1}) == ModelParams(**FIG1)
    assert raw["impact"] == {"kind": "exponential", "lambda": 1.0}
    assert ImpactFunction.exponential(raw["impact"]["lambda"]).lam == 1.0
