"""Command-line front end: ``liqfuel {boundary,simulate,verify,tau,proceeds}``.

Exit codes: 0 success, 1 usage or parse error, 2 model assumptions violated
(report on stderr as JSON), 3 numeric failure.
"""

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .errors import AssumptionError, DomainError, InconsistencyError, NumericError
from .model import check_assumptions, params_from_dict

log = logging.getLogger("liqfuel")

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _g17(x) -> str:
    return f"{float(x):.17g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _dump_json(obj) -> str:
    # repr of a float is the shortest round-tripping form, i.e. at most 17 digits
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


# run configuration --------------------------------------------------------------------

def _load(args):
    try:
        with open(args.params) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"parameter file not found: {args.params}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{args.params}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            val = float(v)
        except ValueError:
            raise UsageError(f"override value for {k} is not a number: {v!r}") from None
        if k in ("lambda", "impact.lambda"):
            if not isinstance(raw.get("impact"), dict):
                raise UsageError("impact block missing; cannot override lambda")
            raw["impact"]["lambda"] = val
        else:
            raw[k] = val
    try:
        return params_from_dict(raw)
    except DomainError as e:
        raise UsageError(f"{args.params}: {e}") from None


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _target(args, name) -> str:
    path = os.path.join(_outdir(args), name)
    if os.path.exists(path) and not args.force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    return path


def _write(args, name, text):
    path = _target(args, name)
    with open(path, "w") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _require_assumptions(params, f):
    rep = check_assumptions(params, f)
    if not rep.ok:
        raise AssumptionError("model assumptions violated", rep)
    return rep


def _boundary_for(params, f, theta_max, tol=1e-10):
    from .boundary import solve_boundary

    _require_assumptions(params, f)
    return solve_boundary(params, f, theta_max, tol=tol, check=False)


def _parse_list(text, what):
    items = [s for s in (text or "").replace(",", " ").split() if s]
    if not items:
        raise UsageError(f"{what} list is empty")
    try:
        return [float(s) for s in items]
    except ValueError:
        raise UsageError(f"{what} must be numbers, got {text!r}") from None


# subcommands -----------------------------------------------------------------------------

def cmd_boundary(args, params, f):
    if args.theta_max < 0:
        raise UsageError("--theta-max must be non-negative")
    b = _boundary_for(params, f, args.theta_max, args.tol)
    b.to_csv(_target(args, "boundary.csv"))
    _write(args, "endpoints.json", _dump_json({"y0": b.y0, "y_inf": b.y_inf, "theta_max": b.theta_max,
                                               "n_knots": int(b.theta_knots.size), "warnings": list(b.warnings)}) + "\n")
    print(f"y0 {_g17(b.y0)}\ny_inf {_g17(b.y_inf)}")
    return EXIT_OK


def cmd_simulate(args, params, f):
    from .liquidation import expected_proceeds_boundary
    from .simulate import SimConfig, estimate_proceeds_mc, run_paths, simulate_path
    from .svg import polyline_svg
    from .value import ValueFunction

    if args.theta0 < 0:
        raise UsageError("--theta0 must be non-negative")
    if args.emit_paths < 0 or args.record_every < 1:
        raise UsageError("--emit-paths must be >= 0 and --record-every >= 1")
    try:
        cfg = SimConfig(dt=args.dt, n_paths=args.paths, seed=args.seed, scheme=args.scheme,
                        horizon_cap=args.horizon_cap)
    except DomainError as e:
        raise UsageError(str(e)) from None
    b = _boundary_for(params, f, max(args.theta0, 1e-9))
    y0 = b(args.theta0) if args.y0 is None else args.y0
    # claim output names before the long run
    targets = {"summary": _target(args, "summary.json")}
    for i in range(args.emit_paths):
        targets[f"path{i}"] = _target(args, f"path_{i}.csv")
    if args.emit_paths:
        targets["svg"] = _target(args, "path.svg")
    t0 = time.time()
    run = run_paths(params, f, b, y0, args.theta0, cfg)
    est = estimate_proceeds_mc(params, f, b, y0, args.theta0, cfg, run=run)
    vf = ValueFunction(b)
    summary = est.to_dict()
    summary.update({"delta0": run.delta0, "closed_form": params.s_bar0 * float(vf.value(y0, args.theta0)),
                    "theta0": args.theta0, "y0": y0, "scheme": cfg.scheme, "seconds": time.time() - t0})
    if args.y0 is None and args.theta0 > 0:
        summary["closed_form_ode"] = params.s_bar0 * expected_proceeds_boundary(b, args.theta0)
    with open(targets["summary"], "w") as fh:
        fh.write(_dump_json(summary) + "\n")
    for i in range(args.emit_paths):
        sp = simulate_path(params, f, b, y0, args.theta0, cfg, path_index=i, record_every=args.record_every)
        sp.to_csv(targets[f"path{i}"])
        if i == 0:
            yb = np.where(sp.theta > 0, b(np.clip(sp.theta, 0, b.theta_max)), np.nan)
            scale = args.theta0 if args.theta0 > 0 else 1.0
            polyline_svg([("Y_t", sp.times, sp.Y), ("y(Theta_t)", sp.times, yb),
                          ("Theta_t / Theta_0", sp.times, sp.theta / scale)],
                         targets["svg"], title="impact and boundary along one path", xlabel="t")
    print(f"estimate {_g17(est.estimate)}\nstderr {_g17(est.stderr)}\nclosed_form {_g17(summary['closed_form'])}")
    return EXIT_OK


def _check(name, ok, **info):
    return name, {"pass": bool(ok), **info}


def cmd_verify(args, params, f):
    from .boundary import boundary_inverse, ode_rhs_closed_form, solve_boundary
    from .liquidation import euler_lagrange_residual, expected_proceeds_boundary
    from .simulate import SimConfig, estimate_proceeds_mc
    from .special import relative_turan_margin
    from .value import ValueFunction

    tol = args.tol
    rep = _require_assumptions(params, f)
    checks = dict([_check("assumptions", rep.ok, items={k: v.status for k, v in rep.items.items()})])
    theta_max = args.theta_max
    b = solve_boundary(params, f, theta_max, check=False)

    x = np.arange(-10.0, 10.0 + 1e-9, 0.05)
    phi = params.eigenfunction()
    m = min(float(np.min(relative_turan_margin(phi, n, x))) for n in (1, 2))
    checks.update([_check("turan", m > 0, worst_relative_margin=m)])

    th = np.linspace(0.0, theta_max, 2001)
    yv = b(th)
    mono = bool(np.all(np.diff(yv) < 0)) if theta_max > 0 else True
    inside = bool(np.all(yv > b.y_inf) and np.all(yv <= b.y0))
    ys = np.linspace(b(theta_max), b.y0, 12)[1:-1] if theta_max > 0 else np.array([])
    rt = max((abs(boundary_inverse(b, y, check=False) - b.inverse_interp(y)) / max(abs(b.inverse_interp(y)), 1e-300)
              for y in ys), default=0.0)
    el = 0.0
    if theta_max > 0:
        res, lhs, _ = euler_lagrange_residual(b, np.linspace(theta_max / 200, theta_max, 200))
        el = float(np.max(np.abs(res) / np.maximum(np.abs(lhs), 1e-300)))
    checks.update([_check("boundary", mono and inside and rt < 1e-6 and el < 1e-6, decreasing=mono,
                          in_range=inside, roundtrip_rel=rt, euler_lagrange_rel=el)])

    rng = np.random.default_rng(args.seed)
    pts = rng.uniform(b.y_inf, b.y0, 100)
    pts = pts[(pts > b.y_inf + 1e-6) & (pts < b.y0 - 1e-6)]
    a_ = np.asarray(b.coeffs.rhs(pts))
    c_ = np.asarray(ode_rhs_closed_form(params, f, pts))
    ode = float(np.max(np.abs(a_ - c_) / np.abs(c_)))
    checks.update([_check("ode_form", ode < tol, worst_rel=ode)])

    vf = ValueFunction(b)
    th_p = [t for t in (0.0, 0.5, 1.0, 5.0, 10.0, 25.0, 50.0) if t <= theta_max]
    sp = max(max(abs(v) for v in vf.check_smooth_pasting(t)) for t in th_p)
    checks.update([_check("smooth_pasting", sp < tol, worst_rel=sp)])

    yg = np.linspace(b.y_inf - 2, b.y0 + theta_max + 2, args.grid)
    tg = np.linspace(0.0, theta_max, args.grid)
    var = vf.check_variational(yg, tg, eq_tol=tol, sign_tol=10 * tol)
    checks.update([_check("variational", var.ok, worst=var.worst, n_offenders=len(var.offenders))])

    if f.is_exponential:
        b5 = solve_boundary(params.replace(rho=0.5), f, theta_max, check=False)
        b0 = solve_boundary(params.replace(rho=0.0), f, theta_max, check=False)
        shift = params.sigma * 0.5 * params.sigma_hat / params.beta
        gap = float(np.max(np.abs(b5(th) - b0(th) - shift)))
        checks.update([_check("rho_shift", gap < 1e-6, sup_error=gap, expected_shift=shift)])

    if args.mc_paths > 0 and theta_max > 0:
        theta0 = min(50.0, theta_max)
        cfg = SimConfig(dt=args.mc_dt, n_paths=args.mc_paths, seed=args.seed)
        y_start = b(theta0)
        est = estimate_proceeds_mc(params, f, b, y_start, theta0, cfg)
        cf = params.s_bar0 * expected_proceeds_boundary(b, theta0)
        z = (est.estimate - cf) / est.stderr if est.stderr > 0 else 0.0
        checks.update([_check("closed_form_vs_mc", abs(z) < 3, closed_form=cf, mc=est.to_dict(), z=z)])

    all_pass = all(c["pass"] for c in checks.values())
    _write(args, "verify.json", _dump_json({"all_pass": all_pass, "tol": tol, "checks": checks}) + "\n")
    for k, c in checks.items():
        print(f"{'PASS' if c['pass'] else 'FAIL'} {k}")
    return EXIT_OK if all_pass else EXIT_NUMERIC


def cmd_tau(args, params, f):
    from .liquidation import tau_distribution

    if args.points < 1 or not args.t_max > 0:
        raise UsageError("--points must be >= 1 and --t-max positive")
    if not args.theta0 > 0:
        raise UsageError("--theta0 must be positive")
    b = _boundary_for(params, f, args.theta0)
    t = np.linspace(args.t_max / args.points, args.t_max, args.points)
    d = tau_distribution(b, args.theta0, y_start=args.y0, t_grid=t, measure=args.measure)
    d.to_csv(_target(args, "tau_cdf.csv"))
    print(f"points {args.points}\nmax_accuracy {_g17(np.max(d.accuracy))}")
    return EXIT_OK


def cmd_proceeds(args, params, f):
    from .liquidation import proceeds_profile

    thetas = _parse_list(args.theta0_sweep, "--theta0-sweep")
    if any(t < 0 for t in thetas):
        raise UsageError("--theta0-sweep values must be non-negative")
    b = _boundary_for(params, f, max(max(thetas), 1e-9))
    vals = params.s_bar0 * np.asarray(proceeds_profile(b, np.asarray(thetas)))
    lines = ["theta0,proceeds"] + [f"{_g17(t)},{_g17(v)}" for t, v in zip(thetas, vals)]
    _write(args, "proceeds.csv", "\n".join(lines) + "\n")
    for t, v in zip(thetas, vals):
        print(f"{_g17(t)} {_g17(v)}")
    return EXIT_OK


# parser ------------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("params", help="JSON parameter file")
    common.add_argument("--out", default=".", help="output directory (created if absent)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="liqfuel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("boundary", parents=[common], help="solve the free boundary")
    s.add_argument("--theta-max", type=float, default=50.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_boundary)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo of the optimal strategy")
    s.add_argument("--theta0", type=float, default=50.0)
    s.add_argument("--y0", type=float, default=0.0, help="initial impact (default 0)")
    s.add_argument("--on-boundary", dest="y0", action="store_const", const=None, help="start at y(theta0)")
    s.add_argument("--paths", type=int, default=1000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=20240611)
    s.add_argument("--scheme", default="bridge", choices=("bridge", "project"))
    s.add_argument("--horizon-cap", type=float, default=None)
    s.add_argument("--emit-paths", type=int, default=1)
    s.add_argument("--record-every", type=int, default=10)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", parents=[common], help="run the verification suite")
    s.add_argument("--grid", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--theta-max", type=float, default=50.0)
    s.add_argument("--mc-paths", type=int, default=2000, help="0 skips the Monte Carlo check")
    s.add_argument("--mc-dt", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=20240611)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("tau", parents=[common], help="distribution of the liquidation time")
    s.add_argument("--theta0", type=float, default=50.0)
    s.add_argument("--y0", type=float, default=None, help="initial impact (default: on the boundary)")
    s.add_argument("--t-max", type=float, default=200.0)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--measure", default="physical", choices=("physical", "shifted"))
    s.set_defaults(func=cmd_tau)

    s = sub.add_parser("proceeds", parents=[common], help="expected proceeds over a sweep of theta0")
    s.add_argument("--theta0-sweep", required=True, help="comma or space separated list")
    s.set_defaults(func=cmd_proceeds)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"liqfuel: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        params, f = _load(args)
        return args.func(args, params, f)
    except UsageError as e:
        print(f"liqfuel: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionError as e:
        print(e.report.to_json(), file=sys.stderr)
        return EXIT_ASSUMPTION
    except DomainError as e:
        print(f"liqfuel: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, InconsistencyError, FloatingPointError) as e:
        print(f"liqfuel: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
