"""Endpoints, pasting coefficients M1, M2 and the free-boundary ODE.

Everything is computed from the log-derivatives of Phi so that the ratios
G_n = Phi^(n)/Phi stay accurate far out in the tails:

    M1  = (f/Phi) (G1 - lam) / T1
    M2  = (f/Phi) (lam G1 - G2) / T1
    M1' = (f/Phi) [(G2 - k2) T1 - (G1 - lam) T2] / T1^2

with lam = f'/f, k2 = f''/f, T1 = G1^2 - G2 < 0 and T2 = G1 G2 - G3.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import AssumptionError, DomainError, InconsistencyError, NumericError, RootNotFoundError
from .model import ImpactFunction, ModelParams, check_assumptions

__all__ = [
    "PastingCoefficients",
    "find_y0",
    "find_y_inf",
    "Boundary",
    "solve_boundary",
    "boundary_inverse",
    "ode_rhs_closed_form",
    "block_size",
]

SCAN_STEP = 0.05
MAX_WINDOW_EXPANSIONS = 6


@dataclass(frozen=True)
class PastingCoefficients:
    """Evaluators for M1, M2, M1' and the ODE right-hand side M2/M1'."""

    params: ModelParams
    f: ImpactFunction
    tol: float = 1e-10

    @property
    def phi(self):
        return self.params.eigenfunction(tol=self.tol)

    def _ratios(self, y):
        y = np.asarray(y, dtype=float)
        L = self.phi.logs(y, 4)
        g1 = np.exp(L[1] - L[0])
        g2 = np.exp(L[2] - L[0])
        g3 = np.exp(L[3] - L[0])
        # T1 = G1^2 (1 - Phi Phi''/Phi'^2) keeps the Turan margin's relative accuracy
        t1 = -g1 * g1 * np.expm1(L[0] + L[2] - 2 * L[1])
        t2 = g1 * g2 - g3
        if self.f.is_exponential:
            f_over_phi = np.exp(self.f.lam * y - L[0])
        else:
            f_over_phi = self.f(y) * np.exp(-L[0])
        lam, k2, _ = self.f.ratios(y)
        return f_over_phi, g1, g2, g3, t1, t2, lam, k2

    def m1(self, y):
        fp, g1, g2, _, t1, _, lam, _ = self._ratios(y)
        return fp * (g1 - lam) / t1

    def m2(self, y):
        fp, g1, g2, _, t1, _, lam, _ = self._ratios(y)
        return fp * (lam * g1 - g2) / t1

    def m1_prime(self, y):
        fp, g1, g2, _, t1, t2, lam, k2 = self._ratios(y)
        return fp * ((g2 - k2) * t1 - (g1 - lam) * t2) / (t1 * t1)

    def all(self, y):
        """``(M1, M2, M1')`` sharing one set of special-function evaluations."""
        fp, g1, g2, _, t1, t2, lam, k2 = self._ratios(y)
        return (
            fp * (g1 - lam) / t1,
            fp * (lam * g1 - g2) / t1,
            fp * ((g2 - k2) * t1 - (g1 - lam) * t2) / (t1 * t1),
        )

    def rhs(self, y):
        """Boundary slope ``M2/M1'`` at impact level y."""
        _, g1, g2, _, t1, t2, lam, k2 = self._ratios(y)
        return (lam * g1 - g2) * t1 / ((g2 - k2) * t1 - (g1 - lam) * t2)

    def rhs_prime(self, y, h=1e-5):
        """Derivative of the slope, by a five-point stencil (diagnostics only)."""
        y = np.asarray(y, dtype=float)
        return (-self.rhs(y + 2 * h) + 8 * self.rhs(y + h) - 8 * self.rhs(y - h) + self.rhs(y - 2 * h)) / (12 * h)


def ode_rhs_closed_form(params: ModelParams, f: ImpactFunction, y, tol=1e-10):
    """The boundary slope from the raw products of Phi, ..., Phi''' and f, f', f''.

    An independent route to ``M2/M1'`` used to cross-check the ratio form.
    """
    phi = params.eigenfunction(tol=tol)
    y = np.asarray(y, dtype=float)
    p0, p1, p2, p3 = (phi(n, y) for n in range(4))
    f0, f1, f2 = (f.deriv(n, y) for n in range(3))
    num = (p1 * p1 - p0 * p2) * (f1 * p1 - f0 * p2) / p0
    den = (p0 * p2 - p1 * p1) * f2 + (p1 * p2 - p0 * p3) * f1 + (p1 * p3 - p2 * p2) * f0
    return num / den


def _scan_root(g, what, scan_step=SCAN_STEP, domain=None):
    """Unique sign change of ``g`` in expanding windows [-10-5k, 10+5k], clipped to ``domain``."""
    for k in range(MAX_WINDOW_EXPANSIONS + 1):
        lo, hi = -10.0 - 5 * k, 10.0 + 5 * k
        if domain is not None:
            lo, hi = max(lo, domain[0]), min(hi, domain[1])
        x = np.linspace(lo, hi, int(round((hi - lo) / scan_step)) + 1)
        gx = g(x)
        s = np.sign(gx)
        idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
        # a grid point landing exactly on the root shows up in two adjacent cells
        idx = idx[np.concatenate(([True], np.diff(idx) > 1))] if idx.size else idx
        if idx.size > 1:
            raise InconsistencyError(
                f"{what}: {idx.size} sign changes near {x[idx].tolist()} contradict uniqueness"
            )
        if idx.size == 1:
            i = idx[0]
            if gx[i] == 0:
                return float(x[i])
            if gx[i + 1] == 0:
                return float(x[i + 1])
            return brentq(lambda t: float(g(np.array([t]))[0]), x[i], x[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
    raise RootNotFoundError(f"{what}: no sign change in [-{10 + 5 * MAX_WINDOW_EXPANSIONS}, {10 + 5 * MAX_WINDOW_EXPANSIONS}]")


def find_y0(params: ModelParams, f: ImpactFunction, tol=1e-10) -> float:
    """Root of ``f'/f = Phi'/Phi`` (where M1 vanishes)."""
    phi = params.eigenfunction(tol=tol)

    def g(x):
        return f.ratios(x)[0] - phi.ratio(1, x)

    y0 = _scan_root(g, "y0", domain=None if f.is_exponential else f.domain)
    res = abs(float(g(np.array([y0]))[0]))
    if res > 1e-12 * max(1.0, abs(float(f.ratios(np.array([y0]))[0][0]))):
        raise NumericError("y0 residual above 1e-12", residual=res)
    return y0


def find_y_inf(params: ModelParams, f: ImpactFunction, tol=1e-10) -> float:
    """Root of ``f'/f = Phi''/Phi'`` (where M2 vanishes)."""
    phi = params.eigenfunction(tol=tol)

    def g(x):
        return f.ratios(x)[0] - phi.ratio(2, x)

    yi = _scan_root(g, "y_inf", domain=None if f.is_exponential else f.domain)
    res = abs(float(g(np.array([yi]))[0]))
    if res > 1e-12 * max(1.0, abs(float(f.ratios(np.array([yi]))[0][0]))):
        raise NumericError("y_inf residual above 1e-12", residual=res)
    return yi


@dataclass(frozen=True)
class Boundary:
    """The solved free boundary on ``[0, theta_max]``.

    Evaluation uses cubic Hermite interpolation through the accepted ODE
    steps with slopes taken from the ODE itself, so the interpolant is
    C1 and inherits the step accuracy.  Nothing is extrapolated.
    """

    params: ModelParams
    f: ImpactFunction
    coeffs: PastingCoefficients
    theta_knots: np.ndarray
    y_values: np.ndarray
    slopes: np.ndarray
    y0: float
    y_inf: float
    theta_max: float
    tol: float
    warnings: tuple = ()
    _spline: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)

    def _theta(self, theta):
        th = np.asarray(theta, dtype=float)
        if np.any(th < 0) or np.any(th > self.theta_max * (1 + 1e-14) + 1e-300):
            raise DomainError(f"theta outside the solved range [0, {self.theta_max}]")
        return np.clip(th, 0.0, self.theta_max)

    def __call__(self, theta):
        th = self._theta(theta)
        if self._spline is None:
            return np.full(th.shape, self.y0) if th.ndim else self.y0
        out = self._spline(th)
        return out if np.ndim(out) else float(out)

    def slope(self, theta, exact=True):
        """``y'(theta)``; exact=True evaluates M2/M1' at the interpolated point."""
        th = self._theta(theta)
        if exact:
            out = self.coeffs.rhs(self(th))
        elif self._spline is None:
            out = np.full(th.shape, self.slopes[0])
        else:
            out = self._spline(th, 1)
        return out if np.ndim(out) else float(out)

    def inverse_interp(self, y):
        """Inverse of the interpolant by bracketing on the knots."""
        y = float(y)
        if not (self.y_values[-1] <= y <= self.y0):
            raise DomainError(f"y={y} outside the solved boundary range [{self.y_values[-1]}, {self.y0}]")
        if self._spline is None or y == self.y0:
            return 0.0
        # y_values is decreasing; locate the cell then solve inside it
        j = int(np.searchsorted(-self.y_values, -y))
        j = min(max(j, 1), self.y_values.size - 1)
        a, b = self.theta_knots[j - 1], self.theta_knots[j]
        ga, gb = self(a) - y, self(b) - y
        if ga == 0:
            return float(a)
        if gb == 0:
            return float(b)
        return brentq(lambda t: self._spline(t) - y, a, b, xtol=1e-15, rtol=1e-15)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("theta,y,dy_dtheta\n")
            for t, y, s in zip(self.theta_knots, self.y_values, self.slopes):
                fh.write(f"{t:.17g},{y:.17g},{s:.17g}\n")


def _fritsch_carlson_ok(x, y, m):
    d = np.diff(y) / np.diff(x)
    a = m[:-1] / d
    b = m[1:] / d
    return bool(np.all((a > 0) & (b > 0) & (a * a + b * b <= 9.0)))


def solve_boundary(
    params: ModelParams,
    f: ImpactFunction,
    theta_max: float,
    tol: float = 1e-10,
    max_step: float = 0.25,
    check: bool = True,
) -> Boundary:
    """Integrate ``y' = M2(y)/M1'(y)``, ``y(0) = y0`` on ``[0, theta_max]``.

    Refuses parameter sets that fail :func:`check_assumptions` when
    ``check`` is set.  If the solution creeps to within ~1e-13 of y_inf the
    remaining range is clamped there and a warning is recorded.
    """
    if not np.isfinite(theta_max) or theta_max < 0:
        raise DomainError(f"theta_max must be finite and non-negative, got {theta_max}")
    if check:
        rep = check_assumptions(params, f)
        if not rep.ok:
            raise AssumptionError("model assumptions fail on the check grid", report=rep)
    coeffs = PastingCoefficients(params, f, tol)
    y0 = find_y0(params, f, tol)
    y_inf = find_y_inf(params, f, tol)
    if not y_inf < y0:
        raise InconsistencyError(f"expected y_inf < y0, got {y_inf} >= {y0}")
    s0 = float(coeffs.rhs(np.array([y0]))[0])
    if theta_max == 0:
        return Boundary(params, f, coeffs, np.array([0.0]), np.array([y0]), np.array([s0]),
                        y0, y_inf, 0.0, tol)

    notes = []
    floor = y_inf + 1e-13 * max(1.0, abs(y_inf))

    def rhs(_t, y):
        return [float(coeffs.rhs(np.array([max(y[0], floor)]))[0])]

    def hit_floor(_t, y):
        return y[0] - floor

    hit_floor.terminal = True
    hit_floor.direction = -1

    sol = solve_ivp(rhs, (0.0, theta_max), [y0], method="RK45", rtol=tol, atol=tol * 1e-2,
                    max_step=max_step, events=hit_floor, dense_output=True)
    if sol.status == -1:
        raise NumericError(f"boundary ODE failed: {sol.message}")
    # densify each accepted step with the integrator's own continuous
    # extension so the cubic Hermite cells are a quarter of a step wide
    fr = np.array([0.25, 0.5, 0.75])
    inner = (sol.t[:-1, None] + np.diff(sol.t)[:, None] * fr[None, :]).ravel()
    th = np.sort(np.concatenate([sol.t, inner]))
    ys = sol.sol(th)[0]
    ys[np.searchsorted(th, sol.t)] = sol.y[0]
    if sol.status == 1 and th[-1] < theta_max:
        msg = f"boundary within 1e-13 of y_inf at theta={th[-1]:.6g}; clamped on [{th[-1]:.6g}, {theta_max}]"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        extra = np.linspace(th[-1], theta_max, 3)[1:]
        # keep strict decrease inside the clamp band
        th = np.concatenate([th, extra])
        ys = np.concatenate([ys, floor - np.array([0.5, 1.0]) * 1e-14 * max(1.0, abs(y_inf))])
    slopes = np.asarray(coeffs.rhs(ys), dtype=float)
    if np.any(np.diff(ys) >= 0) or np.any(slopes >= 0):
        raise InconsistencyError("solved boundary is not strictly decreasing")
    if not _fritsch_carlson_ok(th, ys, slopes):
        notes.append("Hermite interpolant fails the Fritsch-Carlson monotonicity test on some cell")
    spline = CubicHermiteSpline(th, ys, slopes, extrapolate=False)
    return Boundary(params, f, coeffs, th, ys, slopes, y0, y_inf, float(theta_max), tol,
                    tuple(notes), spline)


def boundary_inverse(b: Boundary, y: float, check: bool = True, rtol: float = 1e-6) -> float:
    """``theta`` with ``y(theta) = y``, as ``int_{y0}^{y} M1'/M2``.

    With ``check`` the result is compared to the inverted interpolant and
    an :class:`InconsistencyError` is raised if they disagree beyond rtol.
    """
    y = float(y)
    if not (b.y_inf < y <= b.y0):
        raise DomainError(f"y={y} outside (y_inf, y0] = ({b.y_inf}, {b.y0}]")
    if y == b.y0:
        return 0.0

    def integrand(x):
        return float(1.0 / b.coeffs.rhs(np.array([x]))[0])

    val, err = quad(integrand, b.y0, y, epsabs=0.0, epsrel=1e-12, limit=500)
    theta = val
    if check and b.y_values[-1] <= y:
        ref = b.inverse_interp(y)
        if abs(ref - theta) > rtol * max(abs(theta), 1e-12) + 10 * b.tol:
            raise InconsistencyError(f"quadrature inverse {theta} and interpolated inverse {ref} disagree")
    return theta


def block_size(b: Boundary, y, theta, max_iter: int = 60):
    """Root ``Delta`` of ``y - Delta = y(theta - Delta)`` for points strictly
    between the boundary and the line ``y0 + theta`` (vectorised).

    ``g(Delta) = y - Delta - y(theta - Delta)`` has slope ``-1 + y' < -1``,
    so safeguarded Newton on the bracket [0, theta] converges quickly.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    lo = np.zeros_like(y)
    hi = th.copy()
    s = np.asarray(b.slope(th, exact=False))
    d = np.clip((y - np.asarray(b(th))) / (1.0 - s), 0.0, th)
    for _ in range(max_iter):
        tb = th - d
        g = y - d - np.asarray(b(tb))
        lo = np.where(g > 0, d, lo)
        hi = np.where(g < 0, d, hi)
        nd = d + g / (1.0 - np.asarray(b.slope(tb, exact=False)))
        nd = np.where((nd <= lo) | (nd >= hi), 0.5 * (lo + hi), nd)
        done = np.abs(g) <= 1e-13 * np.maximum(1.0, np.abs(y))
        d = np.where(done, d, nd)
        if np.all(done):
            break
    g = y - d - np.asarray(b(th - d))
    if np.any(np.abs(g) > 1e-12 * np.maximum(1.0, np.abs(y))):
        raise NumericError("block-size solver did not converge", residual=float(np.max(np.abs(g))))
    return d
