"""Candidate value function on the wait and sell regions, with HJB checks."""

from dataclasses import dataclass

import numpy as np

from .boundary import Boundary, block_size
from .errors import DomainError

__all__ = [
    "WAIT",
    "SELL1",
    "SELL2",
    "BOUNDARY_WS",
    "BOUNDARY_S1S2",
    "ZERO_INVENTORY",
    "REGION_NAMES",
    "ValueFunction",
    "VariationalReport",
]

WAIT, SELL1, SELL2, BOUNDARY_WS, BOUNDARY_S1S2, ZERO_INVENTORY = range(6)
REGION_NAMES = ("Wait", "Sell1", "Sell2", "BoundaryWS", "BoundaryS1S2", "ZeroInventory")
TIE_BAND = 1e-12
SMALL_THETA = 1e-3  # below this C(theta) is integrated from C' instead of M1(y(theta))
_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass(frozen=True)
class VariationalReport:
    """Pointwise HJB quantities on a grid and the verdict."""

    y: np.ndarray
    theta: np.ndarray
    region: np.ndarray
    lv: np.ndarray
    gap: np.ndarray  # f - V_y - V_theta
    lv_rel: np.ndarray
    gap_rel: np.ndarray
    eq_tol: float
    sign_tol: float
    worst: dict
    offenders: list

    @property
    def ok(self) -> bool:
        return not self.offenders


class ValueFunction:
    """``V(y, theta)`` assembled from the solved boundary.

    Wait region: ``Phi(y) C(theta)`` with ``C = M1(y(theta))`` and
    ``C' = M2(y(theta))``.  Near sell region: the wait value after the block
    sale ``Delta`` plus its proceeds.  Far sell region: sell everything.
    """

    def __init__(self, boundary: Boundary):
        self.boundary = boundary
        self.params = boundary.params
        self.f = boundary.f
        self.coeffs = boundary.coeffs
        self.phi = boundary.coeffs.phi
        self.y0 = boundary.y0

    # regions -------------------------------------------------------------

    def _check_theta(self, theta):
        th = np.asarray(theta, dtype=float)
        if np.any(th < 0):
            raise DomainError("theta must be non-negative")
        if np.any(th > self.boundary.theta_max):
            raise DomainError(f"theta beyond the solved range {self.boundary.theta_max}")
        return th

    def classify(self, y, theta):
        y, th = np.broadcast_arrays(np.asarray(y, float), self._check_theta(theta))
        yb = np.asarray(self.boundary(th))
        reg = np.where(y < yb, WAIT, np.where(y < self.y0 + th, SELL1, SELL2))
        reg = np.where(np.abs(y - (self.y0 + th)) <= TIE_BAND, BOUNDARY_S1S2, reg)
        reg = np.where(np.abs(y - yb) <= TIE_BAND, BOUNDARY_WS, reg)
        reg = np.where(th == 0, ZERO_INVENTORY, reg)
        return reg if reg.ndim else int(reg)

    def _c_of(self, ta, m1):
        """``C`` at anchors ``ta`` given ``M1(y(ta))``.

        ``M1`` carries a rounding residue of order 1e-16 where it vanishes
        (at y0), which swamps ``C(theta) ~ f(y0) theta`` for tiny theta; there
        ``C`` is the two-point Gauss rule for ``int_0^theta M2(y(s)) ds``.
        """
        ta = np.asarray(ta, dtype=float)
        small = ta < SMALL_THETA
        if not np.any(small):
            return m1
        t = ta[small]
        q = sum(np.asarray(self.coeffs.m2(self.boundary(g * t))) for g in _GAUSS2)
        out = np.array(m1, dtype=float, copy=True)
        out[small] = 0.5 * t * q
        return out

    def C(self, theta):
        th = self._check_theta(theta)
        c = self._c_of(np.atleast_1d(th), np.atleast_1d(self.coeffs.m1(self.boundary(th))))
        return float(c[0]) if th.ndim == 0 else c.reshape(th.shape)

    def C_prime(self, theta):
        return self.coeffs.m2(self.boundary(theta))

    def delta_distance(self, y, theta, check=True):
        """Block size ``Delta`` with ``y(theta - Delta) = y - Delta`` (vectorised)."""
        y, th = np.broadcast_arrays(np.asarray(y, float), self._check_theta(theta))
        scalar = y.ndim == 0
        y = np.atleast_1d(y).astype(float)
        th = np.atleast_1d(th).astype(float)
        b = self.boundary
        g_lo = y - np.asarray(b(th))
        g_hi = y - th - self.y0
        if check and (np.any(g_lo < -TIE_BAND) or np.any(g_hi > TIE_BAND)):
            raise DomainError("delta_distance needs a point in the closed near sell region")
        # endpoints of the bracket: on the boundary Delta = 0, at y0 + theta Delta = theta
        d = np.where(g_hi >= 0, th, 0.0)
        todo = (g_lo > 0) & (g_hi < 0)
        if np.any(todo):
            dd = self._solve_delta(y[todo], th[todo])
            d[todo] = dd
        return float(d[0]) if scalar else d

    def _solve_delta(self, y, th):
        return block_size(self.boundary, y, th)

    # evaluation ------------------------------------------------------------

    def _effective(self, y, th):
        """Map every point to (anchor y_b, anchor theta_b, region) for the formulas."""
        reg = np.atleast_1d(self.classify(y, th))
        y = np.atleast_1d(y).astype(float)
        th = np.atleast_1d(th).astype(float)
        yb = np.asarray(self.boundary(th), dtype=float).reshape(y.shape)
        wait = (y < yb) | (np.abs(y - yb) <= TIE_BAND)
        # theta = 0 without a tie: the wait formula for y < y0, sell-all above
        s2 = ~wait & (y >= self.y0 + th - TIE_BAND * (th > 0))
        s1 = ~wait & ~s2
        d = np.zeros_like(y)
        if np.any(s1):
            d[s1] = self._solve_delta(y[s1], th[s1])
        return reg, y, th, wait, s1, s2, d

    def evaluate(self, y, theta):
        """``(V, V_y, V_theta, V_yy, region)`` as arrays of the broadcast shape."""
        y, th = np.broadcast_arrays(np.asarray(y, float), self._check_theta(theta))
        shape = y.shape
        reg, y, th, wait, s1, s2, d = self._effective(y.ravel(), th.ravel())
        V = np.zeros_like(y)
        Vy = np.zeros_like(y)
        Vt = np.zeros_like(y)
        Vyy = np.zeros_like(y)
        f = self.f

        ws = wait | s1
        if np.any(ws):
            ya = np.where(s1, y - d, y)[ws]
            ta = np.where(s1, th - d, th)[ws]
            yb_anchor = np.asarray(self.boundary(ta))
            m1, m2, _ = self.coeffs.all(yb_anchor)
            m1 = self._c_of(ta, m1)
            L = self.phi.logs(ya, 3)
            p0, p1, p2 = np.exp(L)
            V[ws] = p0 * m1
            Vy[ws] = p1 * m1
            Vt[ws] = p0 * m2
            Vyy[ws] = p2 * m1
        if np.any(s1):
            ys, ds = y[s1], d[s1]
            V[s1] += f.integral_below(ys, ds)
            Vy[s1] += f(ys) - f(ys - ds)
            Vyy[s1] += f.deriv(1, ys) - f.deriv(1, ys - ds)
        if np.any(s2):
            ys, ts = y[s2], th[s2]
            V[s2] = f.integral_below(ys, ts)
            Vy[s2] = f(ys) - f(ys - ts)
            Vt[s2] = f(ys - ts)
            Vyy[s2] = f.deriv(1, ys) - f.deriv(1, ys - ts)
        out = [a.reshape(shape) for a in (V, Vy, Vt, Vyy)]
        return (*out, reg.reshape(shape))

    def value(self, y, theta):
        V = self.evaluate(y, theta)[0]
        return V if V.ndim else float(V)

    def value_partials(self, y, theta):
        _, Vy, Vt, Vyy, _ = self.evaluate(y, theta)
        if Vy.ndim == 0:
            return float(Vy), float(Vt), float(Vyy)
        return Vy, Vt, Vyy

    def generator(self, y, theta):
        """``LV = sigma_hat^2/2 V_yy + (sigma rho sigma_hat - beta y) V_y - delta V``."""
        V, Vy, _, Vyy, _ = self.evaluate(y, theta)
        p = self.params
        return 0.5 * p.sigma_hat**2 * Vyy + (p.drift_shift - p.beta * np.asarray(y)) * Vy - p.delta * V

    # checks ----------------------------------------------------------------

    def check_smooth_pasting(self, theta, independent=False):
        """Relative residuals of the two pasting identities at ``(y(theta), theta)``.

        ``C'`` is ``M2(y(theta))`` unless ``independent`` is set, in which
        case it is ``M1'(y) y'`` with ``y'`` differentiated from the
        interpolant; the latter tests the ODE solution itself.
        """
        th = self._check_theta(theta)
        yb = np.asarray(self.boundary(th), dtype=float)
        m1, m2, m1p = self.coeffs.all(yb)
        if independent:
            m2 = m1p * np.asarray(self.boundary.slope(th, exact=False))
        p0, p1, p2 = np.exp(self.phi.logs(yb, 3))
        f0, f1 = self.f(yb), self.f.deriv(1, yb)
        r1 = (p0 * m2 + p1 * m1 - f0) / f0
        r2 = (p1 * m2 + p2 * m1 - f1) / f1
        if r1.ndim == 0:
            return float(r1), float(r2)
        return r1, r2

    def check_variational(self, y_grid, theta_grid, eq_tol=1e-8, sign_tol=1e-7, n_worst=10):
        """Evaluate both HJB terms on the tensor grid and check the variational inequality.

        Residuals are scaled by the size of the terms that make them up, so
        ``eq_tol`` is a relative tolerance.  The sign conditions are checked
        on the same scale with slack ``sign_tol``.
        """
        Y, T = np.meshgrid(np.asarray(y_grid, float), np.asarray(theta_grid, float), indexing="ij")
        V, Vy, Vt, Vyy, reg = self.evaluate(Y, T)
        p = self.params
        drift = p.drift_shift - p.beta * Y
        lv = 0.5 * p.sigma_hat**2 * Vyy + drift * Vy - p.delta * V
        lv_scale = 0.5 * p.sigma_hat**2 * np.abs(Vyy) + np.abs(drift * Vy) + p.delta * np.abs(V)
        fy = self.f(Y)
        gap = fy - Vy - Vt
        gap_scale = fy + np.abs(Vy) + np.abs(Vt)
        tiny = np.finfo(float).tiny
        lv_rel = lv / np.maximum(lv_scale, tiny)
        gap_rel = gap / np.maximum(gap_scale, tiny)

        theta_pos = T > 0
        in_wait = reg == WAIT
        on_ws = reg == BOUNDARY_WS
        in_sell = np.isin(reg, (SELL1, SELL2, BOUNDARY_S1S2))
        zero = reg == ZERO_INVENTORY

        offenders = []

        def flag(mask, vals, what):
            for i in np.argwhere(mask)[:n_worst]:
                i = tuple(i)
                offenders.append({"check": what, "y": float(Y[i]), "theta": float(T[i]),
                                  "region": REGION_NAMES[int(reg[i])], "value": float(vals[i])})

        flag(in_wait & (np.abs(lv_rel) > eq_tol), lv_rel, "LV = 0 in Wait")
        flag(on_ws & (np.abs(lv_rel) > eq_tol), lv_rel, "LV = 0 on boundary")
        flag((in_sell | on_ws) & (np.abs(gap_rel) > eq_tol), gap_rel, "f - Vy - Vtheta = 0 in Sell")
        flag(in_wait & (gap_rel > sign_tol), gap_rel, "f - Vy - Vtheta < 0 in Wait")
        flag(in_sell & (lv_rel > sign_tol), lv_rel, "LV <= 0 in Sell")
        flag(zero & (np.abs(V) > 0), V, "V(y, 0) = 0")

        def worst(mask, vals):
            return float(np.max(np.abs(vals[mask]))) if np.any(mask) else 0.0

        def most(mask, vals):
            return float(np.max(vals[mask])) if np.any(mask) else -np.inf

        report_worst = {
            "lv_wait_abs_rel": worst(in_wait | on_ws, lv_rel),
            "gap_sell_abs_rel": worst((in_sell | on_ws) & theta_pos, gap_rel),
            "gap_wait_max_rel": most(in_wait & theta_pos, gap_rel),
            "lv_sell_max_rel": most(in_sell & theta_pos, lv_rel),
            "counts": {REGION_NAMES[k]: int(np.sum(reg == k)) for k in range(6)},
        }
        return VariationalReport(Y, T, reg, lv, gap, lv_rel, gap_rel, eq_tol, sign_tol, report_worst, offenders)

    def grid_to_csv(self, path, y_grid, theta_grid):
        Y, T = np.meshgrid(np.asarray(y_grid, float), np.asarray(theta_grid, float), indexing="ij")
        V, Vy, Vt, Vyy, reg = self.evaluate(Y, T)
        p = self.params
        lv = 0.5 * p.sigma_hat**2 * Vyy + (p.drift_shift - p.beta * Y) * Vy - p.delta * V
        gap = self.f(Y) - Vy - Vt
        with open(path, "w") as fh:
            fh.write("y,theta,region,V,Vy,Vtheta,Vyy,LV,f_minus_Vy_Vtheta\n")
            for idx in np.ndindex(Y.shape):
                fh.write(
                    f"{Y[idx]:.17g},{T[idx]:.17g},{REGION_NAMES[int(reg[idx])]},{V[idx]:.17g},{Vy[idx]:.17g},"
                    f"{Vt[idx]:.17g},{Vyy[idx]:.17g},{lv[idx]:.17g},{gap[idx]:.17g}\n"
                )
