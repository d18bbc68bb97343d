"""Closed-form liquidation analytics along a decreasing reflecting boundary.

For a boundary ``y(theta)`` started on it with ``Theta0`` shares:

* ``r(l) = int_0^l (1 - y'(x)) G1(y(x)) dx`` with ``G1 = Phi'/Phi``;
* expected proceeds per unit price ``E(Theta0) = e^{-r(Theta0)} int_0^Theta0 f(y(l)) e^{r(l)} dl``;
* the Laplace transform of the time ``tau_l`` needed to sell ``l`` shares,

      E[e^{-alpha tau_l}] = Phi_a(Y0)/Phi_a(y(Theta0 - l)) * exp(-int_{Theta0-l}^{Theta0} G_a(y(s)) ds),

  with ``Phi_a`` the eigenfunction of eigenvalue ``alpha``.  This equals the
  prefactor form ``Phi_a(Y0)/Phi_a(y(Theta0)) exp(int_0^l (y'(Theta0-x) - 1) G_a dx)``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import quad, solve_ivp

from .boundary import Boundary
from .errors import DomainError, NumericError
from .inversion import euler_inversion, stehfest_inversion
from .model import ImpactFunction, ModelParams

__all__ = [
    "ChebFit",
    "CurveSpec",
    "as_curve",
    "r_of",
    "proceeds_profile",
    "expected_proceeds_boundary",
    "expected_proceeds_gform",
    "euler_lagrange_residual",
    "laplace_inverse_local_time",
    "laplace_prefactor_form",
    "laplace_tau",
    "optimal_w",
    "functionals_J_K",
    "bump",
    "bump_curve",
    "random_bumps",
    "TauDistribution",
    "tau_distribution",
    "tau_moments",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class ChebFit:
    """Chebyshev interpolant of an analytic function on ``[a, b]``.

    The degree doubles until the trailing coefficients fall below
    ``tol`` relative to the largest one.
    """

    def __init__(self, fun: Callable, a: float, b: float, tol: float = 1e-14, n0: int = 24, n_max: int = 384):
        if not a < b:
            raise DomainError("Chebyshev fit needs a < b")
        self.a, self.b = float(a), float(b)
        n = n0
        while True:
            k = np.arange(n)
            x = np.cos(np.pi * (k + 0.5) / n)
            vals = np.asarray(fun(self._to_y(x)))
            # discrete cosine transform on first-kind nodes
            T = np.cos(np.outer(np.arange(n), np.pi * (k + 0.5) / n))
            c = 2.0 / n * (T @ vals)
            c[0] *= 0.5
            scale = np.max(np.abs(c))
            tail = np.max(np.abs(c[-4:]))
            if tail <= tol * scale or n >= n_max:
                break
            n *= 2
        self.coef = c
        self.tail = float(tail / scale) if scale > 0 else 0.0

    def _to_y(self, x):
        return 0.5 * (self.b - self.a) * x + 0.5 * (self.b + self.a)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x = (2.0 * y - self.a - self.b) / (self.b - self.a)
        if np.any(np.abs(x) > 1 + 1e-9):
            raise DomainError("Chebyshev fit evaluated outside its interval")
        return cheb.chebval(x, self.coef)


@dataclass(frozen=True)
class CurveSpec:
    """A decreasing C1 boundary curve on ``[0, theta_max]`` with model data.

    ``y`` and ``dy`` are vectorised callables; ``breakpoints`` lists points
    where the curve is less smooth (integrators restart there).
    """

    params: ModelParams
    f: ImpactFunction
    y: Callable
    dy: Callable
    theta_max: float
    breakpoints: tuple = ()
    name: str = "curve"
    _range: tuple = field(default=None, compare=False)

    @property
    def y0(self) -> float:
        return float(self.y(np.array([0.0]))[0])

    def y_range(self) -> tuple:
        if self._range is not None:
            return self._range
        th = np.linspace(0.0, self.theta_max, 4001)
        yy = np.asarray(self.y(th))
        return float(yy.min()), float(yy.max())

    def check(self, n: int = 4001):
        th = np.linspace(0.0, self.theta_max, n)
        if np.any(np.asarray(self.dy(th)) >= 0):
            raise DomainError(f"{self.name}: curve must be strictly decreasing")


def as_curve(spec) -> CurveSpec:
    """Accept a solved :class:`Boundary` or a :class:`CurveSpec`."""
    if isinstance(spec, CurveSpec):
        return spec
    if isinstance(spec, Boundary):
        b = spec
        lo = float(b.y_values[-1])
        span = b.y0 - lo
        slope_fit = ChebFit(b.coeffs.rhs, lo - 1e-9 * span if span > 0 else lo - 1e-9, b.y0)

        def dy(th):
            return slope_fit(b(th))

        return CurveSpec(b.params, b.f, b, dy, b.theta_max, (), "optimal", (lo, b.y0))
    raise TypeError(f"expected Boundary or CurveSpec, got {type(spec).__name__}")


def _pad(lo, hi):
    span = max(hi - lo, 1e-6)
    return lo - 1e-6 * span, hi + 1e-6 * span


def _segments(c: CurveSpec, a: float, b: float):
    pts = sorted({a, b, *[p for p in c.breakpoints if a < p < b]})
    return list(zip(pts[:-1], pts[1:]))


def _check_theta(c: CurveSpec, theta0):
    if theta0 < 0 or theta0 > c.theta_max * (1 + 1e-14):
        raise DomainError(f"theta0={theta0} outside [0, {c.theta_max}]")


def _integrate_r_E(c: CurveSpec, theta_eval, rtol=1e-12):
    """Integrate ``(r, E)`` with ``r' = (1 - y') G1``, ``E' = f(y) - r' E``."""
    theta_eval = np.asarray(theta_eval, dtype=float)
    top = float(np.max(theta_eval)) if theta_eval.size else 0.0
    _check_theta(c, top)
    phi = c.params.eigenfunction()
    lo, hi = _pad(*c.y_range())
    g1 = ChebFit(lambda y: phi.ratio(1, y), lo, hi)
    f = c.f

    def rhs(th, s):
        yy = float(c.y(np.array([th]))[0])
        rp = (1.0 - float(c.dy(np.array([th]))[0])) * float(g1(yy))
        return [rp, float(f(yy)) - rp * s[1]]

    order = np.argsort(theta_eval)
    out = np.zeros((2, theta_eval.size))
    state = np.zeros(2)
    sorted_t = theta_eval[order]
    res = np.zeros((2, sorted_t.size))
    if top == 0:
        return out
    for a, b in _segments(c, 0.0, top):
        sel = (sorted_t >= a) & (sorted_t <= b)
        sol = solve_ivp(rhs, (a, b), state, method="DOP853", rtol=rtol, atol=1e-14, dense_output=True)
        if sol.status != 0:
            raise NumericError(f"proceeds integration failed: {sol.message}")
        if np.any(sel):
            res[:, sel] = sol.sol(sorted_t[sel])
        state = sol.y[:, -1]
    res[:, sorted_t == 0] = 0.0
    out[:, order] = res
    return out


def r_of(spec, ell):
    """``r(l) = int_0^l (1 - y') Phi'/Phi (y) dx``, scalar or array ``l``."""
    c = as_curve(spec)
    ell_arr = np.asarray(ell, dtype=float)
    if np.any(ell_arr < 0):
        raise DomainError("ell must be non-negative")
    out = _integrate_r_E(c, ell_arr.ravel())[0].reshape(ell_arr.shape)
    return float(out) if out.ndim == 0 else out


def proceeds_profile(spec, theta0s):
    """Expected proceeds (per unit initial price) for every ``Theta0`` in the list."""
    c = as_curve(spec)
    th = np.asarray(theta0s, dtype=float)
    if np.any(th < 0):
        raise DomainError("theta0 must be non-negative")
    out = _integrate_r_E(c, th.ravel())[1].reshape(th.shape)
    return float(out) if out.ndim == 0 else out


def expected_proceeds_boundary(spec, theta0: float) -> float:
    """``e^{-r(Theta0)} int_0^Theta0 f(y(l)) e^{r(l)} dl`` for a start on the boundary."""
    return float(proceeds_profile(spec, float(theta0)))


def expected_proceeds_gform(spec, theta0: float, rtol=1e-12) -> float:
    """Same quantity via ``g(a) = y(Theta0 - a)``:
    ``int_0^Theta0 f(g(l)) exp(-int_0^l (g' + 1) Phi'/Phi(g)) dl``.
    """
    c = as_curve(spec)
    _check_theta(c, theta0)
    if theta0 == 0:
        return 0.0
    phi = c.params.eigenfunction()
    lo, hi = _pad(*c.y_range())
    g1 = ChebFit(lambda y: phi.ratio(1, y), lo, hi)

    def rhs(a, s):
        th = np.array([theta0 - a])
        gv = float(c.y(th)[0])
        gp = -float(c.dy(th)[0])
        return [(gp + 1.0) * float(g1(gv)), float(c.f(gv)) * math.exp(-s[0])]

    state = np.zeros(2)
    bps = tuple(theta0 - p for p in c.breakpoints if 0 < p < theta0)
    pts = sorted({0.0, float(theta0), *bps})
    for a, b in zip(pts[:-1], pts[1:]):
        sol = solve_ivp(rhs, (a, b), state, method="DOP853", rtol=rtol, atol=1e-14)
        if sol.status != 0:
            raise NumericError(f"g-form integration failed: {sol.message}")
        state = sol.y[:, -1]
    return float(state[1])


def euler_lagrange_residual(b: Boundary, thetas):
    """Relative residual of ``e^r Phi (f'Phi' - f Phi'') = f(y0) (Phi'^2 - Phi Phi'')`` along y.

    Returns ``(residual, lhs, rhs)``; both sides are negative.
    """
    th = np.asarray(thetas, dtype=float)
    r = np.asarray(r_of(b, th))
    y = np.asarray(b(th))
    phi = b.coeffs.phi
    p0, p1, p2 = np.exp(phi.logs(y, 3))
    f0, f1 = b.f(y), b.f.deriv(1, y)
    lhs = np.exp(r) * p0 * (f1 * p1 - f0 * p2)
    rhs = float(b.f(b.y0)) * (p1 * p1 - p0 * p2)
    return lhs / rhs - 1.0, lhs, rhs


# Laplace transforms -------------------------------------------------------------

def _phi_alpha(params: ModelParams, alpha, measure: str):
    if measure not in ("physical", "shifted"):
        raise DomainError("measure must be 'physical' or 'shifted'")
    return params.eigenfunction(delta=alpha, shifted=(measure == "shifted"))


def _panel_nodes(c: CurveSpec, a: float, b: float, h_max: float = 0.5):
    """Composite 8-point Gauss-Legendre nodes on [a, b].

    Panels follow the boundary's own ODE steps, which are short where y moves fast.
    """
    if b <= a:
        return np.zeros(0), np.zeros(0)
    edges = {a, b, *[p for p in c.breakpoints if a < p < b]}
    if isinstance(c.y, Boundary):
        steps = c.y.theta_knots[::4]
        edges |= {float(t) for t in steps if a < t < b}
    edges = np.array(sorted(edges))
    fine = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((hi - lo) / h_max)))
        fine.append(np.linspace(lo, hi, n + 1)[:-1])
    edges = np.append(np.concatenate(fine), b)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


@dataclass
class _LaplaceCache:
    curve: CurveSpec
    theta0: float
    ell: float
    y_start: float
    measure: str
    nodes: np.ndarray = None
    weights: np.ndarray = None
    y_nodes: np.ndarray = None
    dy_nodes: np.ndarray = None
    y_top: float = 0.0
    y_end: float = 0.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        c = self.curve
        self.nodes, self.weights = _panel_nodes(c, self.theta0 - self.ell, self.theta0)
        self.y_nodes = np.asarray(c.y(self.nodes)) if self.nodes.size else np.zeros(0)
        self.dy_nodes = np.asarray(c.dy(self.nodes)) if self.nodes.size else np.zeros(0)
        self.y_top = float(c.y(np.array([self.theta0]))[0])
        self.y_end = float(c.y(np.array([self.theta0 - self.ell]))[0])
        ys = np.concatenate([self.y_nodes, [self.y_top, self.y_end]])
        self.lo, self.hi = _pad(float(ys.min()), float(ys.max()))

    def log_value(self, alpha, prefactor_form=False):
        phi = _phi_alpha(self.curve.params, alpha, self.measure)
        if self.nodes.size:
            g = ChebFit(lambda y: phi.ratio(1, y), self.lo, self.hi)
            gv = g(self.y_nodes)
        else:
            gv = np.zeros(0)
        if prefactor_form:
            # nodes s = Theta0 - x, so y'(Theta0 - x) = dy(s)
            integral = np.sum(self.weights * (self.dy_nodes - 1.0) * gv)
            return phi.log(0, self.y_start) - phi.log(0, self.y_top) + integral
        integral = np.sum(self.weights * gv)
        return phi.log(0, self.y_start) - phi.log(0, self.y_end) - integral


def _laplace_setup(spec, ell, y_start, theta0, measure):
    c = as_curve(spec)
    _check_theta(c, theta0)
    if ell < 0 or ell > theta0 * (1 + 1e-14):
        raise DomainError(f"ell={ell} must lie in [0, theta0={theta0}]")
    ell = min(float(ell), float(theta0))
    y_top = float(c.y(np.array([float(theta0)]))[0])
    if y_start is None:
        y_start = y_top
    if y_start > y_top + 1e-12 * max(1.0, abs(y_top)):
        raise DomainError("y_start lies above the boundary; apply the initial block sale first")
    return _LaplaceCache(c, float(theta0), ell, float(min(y_start, y_top)), measure)


def laplace_inverse_local_time(spec, alpha, ell, y_start=None, theta0=None, measure="physical"):
    """``E[exp(-alpha tau_l)]`` for the strategy reflected at ``spec``.

    ``alpha`` may be complex (Re > 0); the result is then complex.  With
    ``measure='shifted'`` the impact drift includes ``sigma rho sigma_hat``.
    """
    if theta0 is None:
        theta0 = as_curve(spec).theta_max
    cache = _laplace_setup(spec, ell, y_start, theta0, measure)
    if np.real(alpha) <= 0:
        raise DomainError("alpha must have positive real part")
    v = np.exp(cache.log_value(alpha))
    return complex(v) if np.iscomplexobj(v) else float(v)


def laplace_prefactor_form(spec, alpha, ell, y_start=None, theta0=None, measure="physical"):
    """The same transform through the prefactor-at-``y(Theta0)`` representation."""
    if theta0 is None:
        theta0 = as_curve(spec).theta_max
    cache = _laplace_setup(spec, ell, y_start, theta0, measure)
    v = np.exp(cache.log_value(alpha, prefactor_form=True))
    return complex(v) if np.iscomplexobj(v) else float(v)


def laplace_tau(spec, theta0, y_start=None, measure="physical"):
    """Callable ``alpha -> E[exp(-alpha tau)]`` for full liquidation (vectorised over alpha)."""
    cache = _laplace_setup(spec, theta0, y_start, theta0, measure)

    def lt(alpha):
        a = np.atleast_1d(alpha)
        out = np.array([np.exp(cache.log_value(x.item())) for x in a])
        return out if np.ndim(alpha) else out[0]

    lt.log = cache.log_value
    return lt


@dataclass(frozen=True)
class TauDistribution:
    t: np.ndarray
    cdf: np.ndarray
    accuracy: np.ndarray
    method: tuple
    raw: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,cdf\n")
            for t, v in zip(self.t, self.cdf):
                fh.write(f"{t:.17g},{v:.17g}\n")


def tau_distribution(spec, theta0, y_start=None, t_grid=None, measure="physical", tol=1e-6,
                     method="euler") -> TauDistribution:
    """``P(tau <= t)`` on ``t_grid`` by inverting ``E[e^{-alpha tau}]/alpha``.

    Euler summation is used per point; where the complex-order Hermite
    evaluation cannot reach its tolerance the point falls back to
    Gaver-Stehfest and is labelled so.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be positive and strictly ascending")
    cache = _laplace_setup(spec, theta0, y_start, theta0, measure)

    def F(s):
        return np.array([np.exp(cache.log_value(complex(x) if np.iscomplexobj(s) else float(x))) / x for x in s])

    raw, acc, meth = [], [], []
    for t in t_grid:
        res = None
        if method == "euler":
            try:
                res = euler_inversion(F, float(t))
            except NumericError:
                res = None
        if res is None:
            res = stehfest_inversion(F, float(t))
        raw.append(res.value)
        acc.append(res.accuracy)
        meth.append(res.method)
    raw = np.array(raw)
    acc = np.array(acc)
    cdf = np.maximum.accumulate(np.clip(raw, 0.0, 1.0))
    adjust = np.max(np.abs(cdf - raw))
    worst = max(float(np.max(acc)), float(adjust))
    if worst > tol:
        warnings.warn(f"tau inversion accuracy estimate {worst:.3g} exceeds {tol:g}", RuntimeWarning, stacklevel=2)
    return TauDistribution(t_grid, cdf, acc, tuple(meth), raw)


def tau_moments(spec, theta0, y_start=None, n: int = 1, measure="physical", alpha0=None, levels: int = 7):
    """``E[tau^n]`` (n = 1, 2) from Richardson-extrapolated difference quotients at alpha -> 0.

    With ``F(alpha) = -log E[e^{-alpha tau}] = k1 alpha - k2 alpha^2/2 + ...``
    the quotients ``F/alpha`` and ``2 (k1 - F/alpha)/alpha`` are extrapolated
    over ``alpha_k = alpha0 2^-k``; ``E[tau^2] = k2 + k1^2``.
    """
    if n not in (1, 2):
        raise DomainError("only the first two moments are available")
    cache = _laplace_setup(spec, theta0, y_start, theta0, measure)
    if theta0 == 0 and (y_start is None):
        return 0.0
    if alpha0 is None:
        # scale the step to the transform: alpha0 * E[tau] ~ 0.25
        probe = -float(cache.log_value(1e-4)) / 1e-4
        alpha0 = 0.25 / max(probe, 1e-6)
    alphas = alpha0 * 0.5 ** np.arange(levels)
    Fv = np.array([-float(cache.log_value(a)) for a in alphas])

    def richardson(vals):
        T = [list(vals)]
        for j in range(1, len(vals)):
            prev = T[-1]
            T.append([(2**j * prev[i + 1] - prev[i]) / (2**j - 1) for i in range(len(prev) - 1)])
        diag = [row[-1] for row in T]
        return diag[-1], abs(diag[-1] - diag[-2])

    k1, e1 = richardson(Fv / alphas)
    if not e1 <= 1e-6 * abs(k1):
        raise NumericError("first-moment extrapolation did not settle", residual=e1 / abs(k1))
    if n == 1:
        return k1
    k2, e2 = richardson(2.0 * (k1 - Fv / alphas) / alphas)
    if not e2 <= 1e-4 * abs(k2):
        raise NumericError("second-moment extrapolation did not settle", residual=e2 / abs(k2))
    return k2 + k1 * k1


# isoperimetric functionals ---------------------------------------------------------

def optimal_w(b: Boundary, theta0: float):
    """``w(r) = y(r^{-1}(r))`` on ``[0, R]`` with ``R = r(Theta0)``; returns ``(w, dw, R)``."""
    c = as_curve(b)
    _check_theta(c, theta0)
    phi = c.params.eigenfunction()
    lo, hi = _pad(*c.y_range())
    g1 = ChebFit(lambda y: phi.ratio(1, y), lo, hi)
    R = r_of(c, theta0)

    def dtheta(_r, s):
        th = min(max(s[0], 0.0), c.theta_max)
        yy = float(c.y(np.array([th]))[0])
        return [1.0 / ((1.0 - float(c.dy(np.array([th]))[0])) * float(g1(yy)))]

    sol = solve_ivp(dtheta, (0.0, R), [0.0], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    if sol.status != 0:
        raise NumericError(f"r inversion failed: {sol.message}")

    def theta_of(r):
        return np.clip(sol.sol(np.asarray(r, dtype=float))[0], 0.0, c.theta_max)

    def w(r):
        return np.asarray(c.y(theta_of(r)))

    def dw(r):
        th = theta_of(r)
        yy = np.asarray(c.y(th))
        return np.asarray(c.dy(th)) / ((1.0 - np.asarray(c.dy(th))) * g1(yy))

    w.theta_of = theta_of
    return w, dw, R


def functionals_J_K(params: ModelParams, f: ImpactFunction, w: Callable, dw: Callable, R: float):
    """``J(w) = int_0^R f(w) e^{-(R-r)} (w' + Phi/Phi'(w)) dr`` and ``K(w) = int_0^R (w' + Phi/Phi'(w)) dr``."""
    phi = params.eigenfunction()

    def inv_g1(r):
        return float(np.exp(phi.log(0, w(np.array([r]))[0]) - phi.log(1, w(np.array([r]))[0])))

    def k_int(r):
        return float(dw(np.array([r]))[0]) + inv_g1(r)

    def j_int(r):
        return float(f(w(np.array([r]))[0])) * math.exp(-(R - r)) * k_int(r)

    pts = np.linspace(0.0, R, 9)[1:-1]
    J = quad(j_int, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=400, points=pts)[0]
    K = quad(k_int, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=400, points=pts)[0]
    return J, K


# perturbations ------------------------------------------------------------------

def bump(u):
    """Cubic B-spline on [-2, 2] (peak 2/3 at 0) and its derivative."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    val = np.where(a < 1, (4 - 6 * u * u + 3 * a**3) / 6, np.where(a < 2, (2 - a) ** 3 / 6, 0.0))
    der = np.where(a < 1, -2 * u + 1.5 * u * a, np.where(a < 2, -np.sign(u) * (2 - a) ** 2 / 2, 0.0))
    return val, der


def bump_curve(spec, center: float, width: float, eps: float, check: bool = True) -> CurveSpec:
    """``y + eps * B((theta - center)/width)``; raises DomainError if the result is not a valid boundary.

    Valid means: strictly decreasing, never above ``y0``, and the bump
    supported inside ``(0, theta_max)``.
    """
    c = as_curve(spec)
    if width <= 0 or center - 2 * width <= 0 or center + 2 * width >= c.theta_max:
        raise DomainError("bump support must lie inside (0, theta_max)")
    y0 = c.y0

    def y(th):
        th = np.asarray(th, dtype=float)
        return np.asarray(c.y(th)) + eps * bump((th - center) / width)[0]

    def dy(th):
        th = np.asarray(th, dtype=float)
        return np.asarray(c.dy(th)) + eps / width * bump((th - center) / width)[1]

    lo, hi = c.y_range()
    rng = (min(lo, lo + eps * 2 / 3), max(hi, hi + eps * 2 / 3))
    bps = tuple(center + width * k for k in (-2, -1, 0, 1, 2))
    out = CurveSpec(c.params, c.f, y, dy, c.theta_max, tuple(sorted(set(c.breakpoints) | set(bps))),
                    f"bump(c={center:.4g}, w={width:.4g}, eps={eps:.3g})", rng)
    if check:
        th = np.union1d(np.linspace(center - 2 * width, center + 2 * width, 2001), [0.0])
        if np.any(np.asarray(dy(th)) >= 0):
            raise DomainError("perturbed curve is not strictly decreasing")
        if np.any(np.asarray(y(th)) > y0 + 1e-15):
            raise DomainError("perturbed curve rises above y0")
    return out


def random_bumps(spec, theta0: float, count: int, eps: float = 1e-2, rng=None, max_tries: int = 1000):
    """Draw ``count`` valid upward bumps supported in ``(0, theta0)``; returns curves and the rejection count."""
    rng = np.random.default_rng(rng)
    c = as_curve(spec)
    curves, rejected = [], 0
    while len(curves) < count:
        if rejected > max_tries:
            raise NumericError(f"could not draw {count} valid bumps (rejected {rejected})")
        width = rng.uniform(0.05, 0.2) * theta0
        center = rng.uniform(2 * width, theta0 - 2 * width)
        try:
            curves.append(bump_curve(c, center, width, eps))
        except DomainError:
            rejected += 1
    return curves, rejected
