"""Monte Carlo simulation of the reflected impact process and its proceeds.

Paths are simulated by a numba kernel.  Per step the impact ``Y`` moves by
its exact OU transition; the boundary is then enforced by one of

* ``bridge`` (default): the running maximum ``M`` of the free step is
  sampled from the Brownian-bridge law and the Skorokhod map is applied to
  it, i.e. ``K`` grows by the ``Delta`` with ``M - Delta = y(Theta - Delta)``.
  The sold shares are booked at the boundary prices
  ``int f(y(u)) du`` over the traversed inventory;
* ``project``: the end-of-step point is projected along (-1, -1) onto the
  boundary and booked as ``f(Y_post) dK``;
* ``uniform``: a fixed selling rate regardless of the state (a suboptimal
  comparison strategy).

The price factor ``e^{-gamma t} S_t`` is carried in log space and sampled
only at the times where it is needed (sales, checkpoints).  Its Brownian
driver is split into the part correlated with the impact noise, which is
accumulated every step, and an independent part drawn exactly over the
gap since the previous sample.

Random numbers come from a counter-based hash keyed by
``(seed, path, step, slot)`` and turned into normals by the inverse CDF;
every path is reproducible on its own.  Alongside the proceeds ``L`` each
path also reports ``E[L | impact path]``, in which the price noise that is
independent of the impact is integrated out.
"""

import dataclasses
import math
import os
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .boundary import Boundary, block_size
from .errors import DomainError
from .model import ImpactFunction, ModelParams

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe, which only warns on older TBB installs
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

__all__ = [
    "SimConfig",
    "SimPath",
    "MCRun",
    "Estimate",
    "DriftReport",
    "initial_block",
    "simulate_path",
    "run_paths",
    "estimate_proceeds_mc",
    "estimate_laplace_mc",
    "martingale_diagnostic",
    "set_threads_from_env",
]

SCHEMES = {"bridge": 0, "project": 1, "uniform": 2}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0


def set_threads_from_env():
    """Cap numba's worker count at ``LIQFUEL_THREADS`` when set."""
    v = os.environ.get("LIQFUEL_THREADS")
    if v:
        try:
            n = int(v)
        except ValueError:
            raise DomainError(f"LIQFUEL_THREADS must be an integer, got {v!r}") from None
        if n < 1:
            raise DomainError("LIQFUEL_THREADS must be at least 1")
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# random numbers ---------------------------------------------------------------

@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _path_key(seed, path):
    return _mix(np.uint64(seed) ^ _mix(np.uint64(path) + _GOLDEN))


@njit(cache=True, inline="always")
def _uniform(key, ctr):
    z = _mix(key + np.uint64(ctr) * _GOLDEN)
    return (float(z >> np.uint64(11)) + 0.5) * _TWO53


@njit(cache=True)
def _ndtri(p):
    """Standard normal quantile, Wichura's AS241 (PPND16), relative error about 1e-16."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
                        + 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r
                      + 133.14166789178437745) * r + 3.387132872796366608) / (
            ((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
                + 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r
              + 42.313330701600911252) * r + 1.0)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        v = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
                 + 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r
               + 4.6303378461565452959) * r + 1.42343711074968357734) / (
            ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r
                + 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r
              + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
                 + 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r
               + 5.4637849111641143699) * r + 6.6579046435011037772) / (
            ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r
                + 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
              + 0.59983220655588793769) * r + 1.0)
    return -v if q < 0 else v


@njit(cache=True, inline="always")
def _normal(key, ctr):
    return _ndtri(_uniform(key, ctr))


# boundary and impact evaluation -------------------------------------------------

@njit(cache=True, inline="always")
def _seg(th, knots, i):
    """Knot interval containing ``th``, searched from the hint ``i``."""
    n = knots.size
    if n == 1:
        return 0
    if i > n - 2:
        i = n - 2
    while i > 0 and knots[i] > th:
        i -= 1
    while i < n - 2 and knots[i + 1] < th:
        i += 1
    return i


@njit(cache=True)
def _bval(th, knots, yk, sk, i):
    if knots.size == 1:
        return yk[0]
    h = knots[i + 1] - knots[i]
    s = (th - knots[i]) / h
    s1 = 1.0 - s
    return ((1.0 + 2.0 * s) * s1 * s1 * yk[i] + s * s1 * s1 * h * sk[i]
            + s * s * (3.0 - 2.0 * s) * yk[i + 1] + s * s * (s - 1.0) * h * sk[i + 1])


@njit(cache=True)
def _bslope(th, knots, yk, sk, i):
    if knots.size == 1:
        return sk[0]
    h = knots[i + 1] - knots[i]
    s = (th - knots[i]) / h
    return ((6.0 * s * s - 6.0 * s) * yk[i] + (3.0 * s * s - 4.0 * s + 1.0) * h * sk[i]
            + (6.0 * s - 6.0 * s * s) * yk[i + 1] + (3.0 * s * s - 2.0 * s) * h * sk[i + 1]) / h


@njit(cache=True)
def _block(yv, theta, yb, i0, knots, yk, sk, y0b):
    """Delta with yv - Delta = y(theta - Delta), clipped to [0, theta]; ``yb = y(theta)``."""
    if yv >= y0b + theta:
        return theta
    if yv <= yb:
        return 0.0
    lo = 0.0
    hi = theta
    i = i0
    d = (yv - yb) / (1.0 - _bslope(theta, knots, yk, sk, i))
    if d > theta:
        d = theta
    tol = 1e-13 * max(1.0, abs(yv))
    for _ in range(80):
        tb = theta - d
        i = _seg(tb, knots, i)
        g = yv - d - _bval(tb, knots, yk, sk, i)
        if abs(g) <= tol:
            return d
        if g > 0:
            lo = d
        else:
            hi = d
        nd = d + g / (1.0 - _bslope(tb, knots, yk, sk, i))
        if nd <= lo or nd >= hi:
            nd = 0.5 * (lo + hi)
        d = nd
    return d


@njit(cache=True)
def _fval(x, fkind, lam, tx0, th_, tf, tdf):
    if fkind == 0:
        return math.exp(lam * x)
    # cubic Hermite table of a generic impact function
    u = (x - tx0) / th_
    i = int(math.floor(u))
    if i < 0:
        i = 0
    if i > tf.size - 2:
        i = tf.size - 2
    s = u - i
    s1 = 1.0 - s
    return ((1.0 + 2.0 * s) * s1 * s1 * tf[i] + s * s1 * s1 * th_ * tdf[i]
            + s * s * (3.0 - 2.0 * s) * tf[i + 1] + s * s * (s - 1.0) * th_ * tdf[i + 1])


@njit(cache=True)
def _boundary_proceeds(theta, d, i, knots, yk, sk, fkind, lam, tx0, th_, tf, tdf):
    """int_{theta-d}^{theta} f(y(u)) du by composite Simpson."""
    m = 2 * max(1, int(math.ceil(d / 0.02)))
    h = d / m
    acc = 0.0
    for j in range(m, -1, -1):
        u = theta - d + j * h
        i = _seg(u, knots, i)
        w = 1.0 if (j == 0 or j == m) else (4.0 if j % 2 == 1 else 2.0)
        acc += w * _fval(_bval(u, knots, yk, sk, i), fkind, lam, tx0, th_, tf, tdf)
    return acc * h / 3.0


@njit(cache=True)
def _segment_proceeds(y_hi, d, fkind, lam, tx0, th_, tf, tdf):
    """int_{y_hi-d}^{y_hi} f by closed form (exponential) or Simpson."""
    if fkind == 0:
        return -math.exp(lam * y_hi) * math.expm1(-lam * d) / lam
    m = 2 * max(1, int(math.ceil(d / 0.02)))
    h = d / m
    acc = 0.0
    for j in range(m + 1):
        w = 1.0 if (j == 0 or j == m) else (4.0 if j % 2 == 1 else 2.0)
        acc += w * _fval(y_hi - d + j * h, fkind, lam, tx0, th_, tf, tdf)
    return acc * h / 3.0


# the path kernel ---------------------------------------------------------------------

@njit(cache=True)
def _path(key, dt, n_max, y, theta_b, D0, L0, beta, sig_hat, sigma, rho, delta,
          fkind, lam, tx0, th_, tf, tdf, knots, yk, sk, y0b, scheme, rate, sub,
          ells, tau_ell, cp_steps, cp_Y, cp_theta, cp_D, cp_L,
          rec_every, rec_t, rec_Y, rec_theta, rec_K, rec_D, rec_L):
    a = math.exp(-beta * dt)
    bridge_var = sig_hat * sig_hat * dt
    drift_D = -delta - 0.5 * sigma * sigma
    orth = math.sqrt(max(1.0 - rho * rho, 0.0))
    use_pair = rho != 0.0
    # normals live on the grid dt/sub so that runs at dt, dt/2, ... share one Brownian path
    h = dt / sub
    a_h = math.exp(-beta * h)
    sv_h = math.sqrt(-math.expm1(-2.0 * beta * h) / (2.0 * beta))
    cov_h = -math.expm1(-beta * h) / beta
    cB_h = cov_h / (sv_h * sv_h)
    sB_h = math.sqrt(max(h - cov_h * cov_h / (sv_h * sv_h), 0.0))
    half_rs2 = 0.5 * sigma * sigma * rho * rho
    iseg = knots.size - 2 if knots.size > 1 else 0

    L = L0
    Lc = L0  # proceeds with the price factor replaced by its mean given the impact path
    B_tot = 0.0
    K = 0.0
    theta = theta_b
    if theta > 0:
        iseg = _seg(theta, knots, iseg)
        yb = _bval(theta, knots, yk, sk, iseg)
    else:
        yb = y0b
    t_last = 0.0
    D_last = D0
    B_acc = 0.0
    tau = math.nan
    flagged = 1
    j_ell = 0
    n_ell = ells.size
    while j_ell < n_ell and ells[j_ell] <= 0.0:
        tau_ell[j_ell] = 0.0
        j_ell += 1
    c = 0
    n_cp = cp_steps.size
    while c < n_cp and cp_steps[c] == 0:
        cp_Y[c] = y
        cp_theta[c] = theta
        cp_D[c] = D0
        cp_L[c] = L
        c += 1
    n_rec = 0
    if rec_t.size > 0:
        rec_t[0] = 0.0
        rec_Y[0] = y
        rec_theta[0] = theta
        rec_K[0] = 0.0
        rec_D[0] = D0
        rec_L[0] = L
        n_rec = 1
    if theta <= 0.0:
        tau = 0.0
        flagged = 0
        n_max = 0
    k_done = 0
    for k in range(n_max):
        t1 = (k + 1) * dt
        base = k * sub
        y_start = y
        xb = 0.0
        for i in range(sub):
            xi = sv_h * _normal(key, (base + i) * 8)
            xb = a_h * xb + xi
            if use_pair:
                dB = cB_h * xi + sB_h * _normal(key, (base + i) * 8 + 1)
                B_acc += dB
                B_tot += dB
        y1 = a * y + sig_hat * xb
        d = 0.0
        if theta > 0.0:
            if scheme == 0:
                m = -math.inf
                if y1 > yb:
                    u = _uniform(key, base * 8 + 4)
                    m = 0.5 * (y_start + y1 + math.sqrt((y1 - y_start) ** 2 - 2.0 * bridge_var * math.log(u)))
                elif 2.0 * (yb - y_start) * (yb - y1) < 50.0 * bridge_var:
                    u = _uniform(key, base * 8 + 4)
                    m = 0.5 * (y_start + y1 + math.sqrt((y1 - y_start) ** 2 - 2.0 * bridge_var * math.log(u)))
                if m > yb:
                    d = _block(m, theta, yb, iseg, knots, yk, sk, y0b)
            elif scheme == 1:
                if y1 > yb:
                    d = _block(y1, theta, yb, iseg, knots, yk, sk, y0b)
            else:
                d = min(rate * dt, theta)
        need_price = (d > 0.0 or (c < n_cp and cp_steps[c] == k + 1)
                      or (rec_t.size > 0 and (k + 1) % rec_every == 0))
        if need_price:
            g = t1 - t_last
            zw = _normal(key, base * 8 + 2)
            D_last = D_last + drift_D * g + sigma * (rho * B_acc + orth * math.sqrt(g) * zw)
            t_last = t1
            B_acc = 0.0
        if d > 0.0:
            if scheme == 0:
                proceeds = _boundary_proceeds(theta, d, iseg, knots, yk, sk, fkind, lam, tx0, th_, tf, tdf)
            elif scheme == 1:
                proceeds = _fval(y1 - d, fkind, lam, tx0, th_, tf, tdf) * d
            else:
                proceeds = _segment_proceeds(y1, d, fkind, lam, tx0, th_, tf, tdf)
            y = y1 - d
            L += math.exp(D_last) * proceeds
            Lc += math.exp(D0 - delta * t1 + sigma * rho * B_tot - half_rs2 * t1) * proceeds
            K += d
            if d >= theta or theta_b - K <= 1e-14 * max(theta_b, 1.0):
                theta = 0.0
                K = theta_b
            else:
                theta = theta_b - K
                iseg = _seg(theta, knots, iseg)
                yb = _bval(theta, knots, yk, sk, iseg)
            while j_ell < n_ell and K >= ells[j_ell] - 1e-12:
                tau_ell[j_ell] = t1
                j_ell += 1
        else:
            y = y1
        while c < n_cp and cp_steps[c] == k + 1:
            cp_Y[c] = y
            cp_theta[c] = theta
            cp_D[c] = D_last
            cp_L[c] = L
            c += 1
        if rec_t.size > 0 and ((k + 1) % rec_every == 0 or theta == 0.0) and n_rec < rec_t.size:
            rec_t[n_rec] = t1
            rec_Y[n_rec] = y
            rec_theta[n_rec] = theta
            rec_K[n_rec] = K
            rec_D[n_rec] = D_last
            rec_L[n_rec] = L
            n_rec += 1
        k_done = k + 1
        if theta == 0.0:
            tau = t1
            flagged = 0
            break
    # checkpoints after completion keep the terminal state
    while c < n_cp:
        cp_Y[c] = y
        cp_theta[c] = theta
        cp_D[c] = D_last if flagged == 0 else math.nan
        cp_L[c] = L
        c += 1
    return L, tau, flagged, n_rec, k_done, Lc


@njit(cache=True, parallel=True)
def _run_many(seed, path0, n, dt, n_max, y, theta_b, D0, L0, beta, sig_hat, sigma, rho, delta,
              fkind, lam, tx0, th_, tf, tdf, knots, yk, sk, y0b, scheme, rate, sub,
              ells, cp_steps, out_L, out_Lc, out_tau, out_flag, out_tau_ell, cp_Y, cp_theta, cp_D, cp_L):
    empty = np.zeros(0)
    for p in prange(n):
        key = _path_key(seed, path0 + p)
        L, tau, fl, _, _, Lc = _path(key, dt, n_max, y, theta_b, D0, L0, beta, sig_hat, sigma, rho, delta,
                                     fkind, lam, tx0, th_, tf, tdf, knots, yk, sk, y0b, scheme, rate, sub,
                                     ells, out_tau_ell[p], cp_steps, cp_Y[p], cp_theta[p], cp_D[p], cp_L[p],
                                     1, empty, empty, empty, empty, empty, empty)
        out_L[p] = L
        out_Lc[p] = Lc
        out_tau[p] = tau
        out_flag[p] = fl


# python front end --------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings; ``horizon_cap`` defaults to ``50/delta``.

    ``substeps`` draws the impact noise on the finer grid ``dt/substeps`` and
    aggregates it exactly.  Runs with equal ``dt/substeps`` and seed then
    share their Brownian paths, which couples a dt-refinement study.
    """

    dt: float = 1e-3
    n_paths: int = 10_000
    seed: int = 20240611
    scheme: str = "bridge"
    horizon_cap: float | None = None
    rate: float = 1.0  # selling rate of the uniform strategy
    substeps: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {sorted(SCHEMES)}")
        if self.horizon_cap is not None and not self.horizon_cap > 0:
            raise DomainError("horizon_cap must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if isinstance(self.substeps, bool) or not isinstance(self.substeps, int) or self.substeps < 1:
            raise DomainError("substeps must be a positive integer")

    def cap(self, params: ModelParams) -> float:
        return self.horizon_cap if self.horizon_cap is not None else 50.0 / params.delta

    def n_steps(self, params: ModelParams) -> int:
        return int(math.ceil(self.cap(params) / self.dt - 1e-9))


def _tables(boundary: Boundary, f: ImpactFunction):
    knots = np.ascontiguousarray(boundary.theta_knots, dtype=float)
    yk = np.ascontiguousarray(boundary.y_values, dtype=float)
    sk = np.ascontiguousarray(boundary.slopes, dtype=float)
    if f.is_exponential:
        ft = (0, f.lam, 0.0, 1.0, np.zeros(2), np.zeros(2))
    else:
        lo, hi = f.domain
        x = np.linspace(lo, hi, 20001)
        ft = (1, 0.0, float(lo), float(x[1] - x[0]), np.asarray(f(x), float), np.asarray(f.deriv(1, x), float))
    return knots, yk, sk, ft


def initial_block(y_minus: float, theta_minus: float, boundary: Boundary) -> float:
    """Size of the opening block sale that brings ``(y, theta)`` onto the closed wait region."""
    if theta_minus < 0:
        raise DomainError("theta must be non-negative")
    if theta_minus == 0:
        return 0.0
    if y_minus >= boundary.y0 + theta_minus:
        return float(theta_minus)
    if y_minus <= boundary(theta_minus):
        return 0.0
    return float(block_size(boundary, y_minus, theta_minus)[0])


def _start(params, f, boundary, y0_minus, theta0_minus):
    if theta0_minus > boundary.theta_max:
        raise DomainError("boundary must be solved up to theta0")
    d0 = initial_block(y0_minus, theta0_minus, boundary)
    L0 = params.s_bar0 * float(f.integral_below(y0_minus, d0)) if d0 > 0 else 0.0
    return d0, L0, y0_minus - d0, theta0_minus - d0


@dataclass
class SimPath:
    """One recorded trajectory.

    The price is also sampled at the recording times, so ``L`` agrees with
    the bulk run of the same path index in law; ``Y``, ``theta`` and ``K``
    agree exactly.
    """

    times: np.ndarray
    Y: np.ndarray
    theta: np.ndarray
    K: np.ndarray
    S_bar: np.ndarray
    L: np.ndarray
    tau: float
    delta0: float
    flagged: bool

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,Y,theta,K,S_bar,L\n")
            for row in zip(self.times, self.Y, self.theta, self.K, self.S_bar, self.L):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def simulate_path(params: ModelParams, f: ImpactFunction, boundary: Boundary, y0_minus: float,
                  theta0_minus: float, cfg: SimConfig, path_index: int = 0, record_every: int = 1) -> SimPath:
    """Simulate and record one path; the same (seed, path_index, dt) always gives the same path."""
    d0, L0, y, theta_b = _start(params, f, boundary, y0_minus, theta0_minus)
    knots, yk, sk, (fk, lam, tx0, th_, tf, tdf) = _tables(boundary, f)
    n_max = cfg.n_steps(params)
    n_rec = n_max // record_every + 3
    rec = [np.zeros(n_rec) for _ in range(6)]
    D0 = math.log(params.s_bar0)
    key = np.uint64(_path_key(np.uint64(cfg.seed), np.uint64(path_index)))
    empty = np.zeros(0)
    L, tau, fl, n, _, _ = _path(key, cfg.dt, n_max, y, theta_b, D0, L0, params.beta, params.sigma_hat,
                                params.sigma, params.rho, params.delta, fk, lam, tx0, th_, tf, tdf, knots, yk, sk,
                                boundary.y0, SCHEMES[cfg.scheme], cfg.rate, cfg.substeps, empty, empty,
                                np.zeros(0, np.int64), empty, empty, empty, empty, record_every, *rec)
    t, Y, th, K, D, Lr = (r[:n] for r in rec)
    S_bar = np.exp(D + params.gamma * t)
    return SimPath(t, Y, th, K, S_bar, Lr, float(tau), d0, bool(fl))


@dataclass
class MCRun:
    """Raw per-path output of :func:`run_paths`."""

    config: SimConfig
    L: np.ndarray
    L_cond: np.ndarray  # E[L | impact path], same mean as L
    tau: np.ndarray
    flagged: np.ndarray
    ells: np.ndarray
    tau_ell: np.ndarray
    checkpoints: np.ndarray
    cp_Y: np.ndarray
    cp_theta: np.ndarray
    cp_D: np.ndarray
    cp_L: np.ndarray
    delta0: float
    L0: float
    y_start: float
    theta_start: float
    extra: dict = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return int(np.sum(self.flagged))


def run_paths(params: ModelParams, f: ImpactFunction, boundary: Boundary, y0_minus: float, theta0_minus: float,
              cfg: SimConfig, ells=(), checkpoints=(), path0: int = 0) -> MCRun:
    """Simulate ``cfg.n_paths`` paths and keep proceeds, liquidation times and checkpoint states."""
    set_threads_from_env()
    d0, L0, y, theta_b = _start(params, f, boundary, y0_minus, theta0_minus)
    knots, yk, sk, (fk, lam, tx0, th_, tf, tdf) = _tables(boundary, f)
    n = cfg.n_paths
    ells = np.sort(np.asarray(ells, dtype=float))
    cps = np.asarray(checkpoints, dtype=float)
    cp_steps = np.rint(cps / cfg.dt).astype(np.int64)
    if cps.size and np.any(np.abs(cp_steps * cfg.dt - cps) > 1e-9 * np.maximum(cps, 1.0)):
        raise DomainError("checkpoints must be multiples of dt")
    if np.any(np.diff(cp_steps) < 0):
        raise DomainError("checkpoints must be ascending")
    out_L = np.zeros(n)
    out_Lc = np.zeros(n)
    out_tau = np.zeros(n)
    out_flag = np.zeros(n, dtype=np.int64)
    out_tau_ell = np.full((n, ells.size), np.nan)
    cp = [np.zeros((n, cps.size)) for _ in range(4)]
    _run_many(np.uint64(cfg.seed), np.uint64(path0), n, cfg.dt, cfg.n_steps(params), y, theta_b,
              math.log(params.s_bar0), L0, params.beta, params.sigma_hat, params.sigma, params.rho,
              params.delta, fk, lam, tx0, th_, tf, tdf, knots, yk, sk, boundary.y0,
              SCHEMES[cfg.scheme], cfg.rate, cfg.substeps, ells, cp_steps, out_L, out_Lc, out_tau, out_flag,
              out_tau_ell, *cp)
    return MCRun(cfg, out_L, out_Lc, out_tau, out_flag.astype(bool), ells, out_tau_ell, cps, *cp,
                 d0, L0, y, theta_b)


@dataclass(frozen=True)
class Estimate:
    estimate: float
    stderr: float
    n_paths: int
    n_flagged: int
    dt: float
    seed: int
    warning: str = ""

    def to_dict(self) -> dict:
        d = {"estimate": self.estimate, "stderr": self.stderr, "n_paths": self.n_paths,
             "n_flagged": self.n_flagged, "dt": self.dt, "seed": self.seed}
        if self.warning:
            d["warning"] = self.warning
        return d


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1 or np.all(x == x[0]):
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _estimate(run: MCRun, values) -> Estimate:
    ok = ~run.flagged
    mean, se = _mean_se(values[ok])
    msg = ""
    frac = run.n_flagged / run.flagged.size
    if frac > 0.01:
        msg = f"{frac:.2%} of paths hit the horizon cap and were excluded"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return Estimate(mean, se, int(ok.sum()), run.n_flagged, run.config.dt, run.config.seed, msg)


def estimate_proceeds_mc(params: ModelParams, f: ImpactFunction, boundary: Boundary, y0_minus: float,
                         theta0_minus: float, cfg: SimConfig, run: MCRun | None = None,
                         estimator: str = "plain") -> Estimate:
    """Mean and standard error of total discounted proceeds over completed paths.

    ``estimator="conditional"`` averages ``E[L | impact path]`` instead of
    ``L``: the price noise independent of the impact is integrated out
    analytically, which leaves the mean unchanged and removes most of the
    variance.
    """
    if estimator not in ("plain", "conditional"):
        raise DomainError("estimator must be 'plain' or 'conditional'")
    if run is None:
        run = run_paths(params, f, boundary, y0_minus, theta0_minus, cfg)
    return _estimate(run, run.L if estimator == "plain" else run.L_cond)


def estimate_laplace_mc(alpha: float, ell: float, params: ModelParams = None, f: ImpactFunction = None,
                        boundary: Boundary = None, y0_minus: float = None, theta0_minus: float = None,
                        cfg: SimConfig = None, run: MCRun | None = None) -> Estimate:
    """Mean and standard error of ``exp(-alpha tau_l)``, ``tau_l`` the time the boundary sales reach l."""
    if run is None:
        run = run_paths(params, f, boundary, y0_minus, theta0_minus, cfg, ells=(ell,))
    if ell > run.theta_start + 1e-12:
        raise DomainError("ell exceeds the inventory left after the opening block")
    idx = np.nonzero(np.isclose(run.ells, ell, rtol=0, atol=1e-12))[0]
    if idx.size == 0:
        raise DomainError(f"run does not track ell={ell}")
    t = run.tau_ell[:, idx[0]]
    return _estimate(run, np.exp(-alpha * t))


@dataclass(frozen=True)
class DriftReport:
    strategy: str
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    g0: float
    z: np.ndarray  # (mean - g0) / stderr, based on the paired increment
    n_paths: int

    @property
    def flat(self) -> bool:
        return bool(np.all(np.abs(self.z[self.t > 0]) < 3.0))

    @property
    def decreasing(self) -> bool:
        later = self.t > 0
        return bool(np.all(np.diff(self.mean) <= 3.0 * np.hypot(self.stderr[1:], self.stderr[:-1]))
                    and np.any(self.z[later] < -3.0))


def _g_values(value_fn, params, Y, theta, D, L):
    V = np.zeros_like(Y)
    live = theta > 0
    if np.any(live):
        V[live] = np.asarray(value_fn.value(Y[live], theta[live]))
    return L + np.exp(D) * V


def _never_trade_states(params, y0_minus, t, n, seed):
    """Exact joint transitions of (Y, log discounted price) at the checkpoint times."""
    rng = np.random.default_rng([int(seed) % (2**63), 7])
    b, sh, s, rho, dl = params.beta, params.sigma_hat, params.sigma, params.rho, params.delta
    Y = np.full(n, float(y0_minus))
    D = np.full(n, math.log(params.s_bar0))
    t_prev = 0.0
    out_Y, out_D = [], []
    for tk in t:
        h = tk - t_prev
        if h > 0:
            a = math.exp(-b * h)
            vy = sh * sh * (-math.expm1(-2 * b * h)) / (2 * b)
            vw = h
            cyw = rho * sh * (-math.expm1(-b * h)) / b
            C = np.array([[vy, cyw], [cyw, vw]])
            Lc = np.linalg.cholesky(C + 1e-300 * np.eye(2))
            z = rng.standard_normal((2, n))
            inc = Lc @ z
            Y = a * Y + inc[0]
            D = D + (-dl - 0.5 * s * s) * h + s * inc[1]
        out_Y.append(Y.copy())
        out_D.append(D.copy())
        t_prev = tk
    return np.array(out_Y).T, np.array(out_D).T


def martingale_diagnostic(strategy: str, t_checkpoints, value_fn, params: ModelParams, f: ImpactFunction,
                          boundary: Boundary, y0_minus: float, theta0_minus: float, cfg: SimConfig,
                          run: MCRun | None = None) -> DriftReport:
    """MC estimates of ``E[G_t]``, ``G_t = L_t + e^{-gamma t} S_t V(Y_t, Theta_t)``.

    ``G_0`` is the exact ``S0 V(Y_0-, Theta_0-)``; the z-scores use the paired
    increments ``G_t - G_0`` so that t = 0 carries no noise.
    """
    t = np.asarray(t_checkpoints, dtype=float)
    g0 = params.s_bar0 * float(value_fn.value(y0_minus, theta0_minus))
    if strategy in ("optimal", "uniform-rate"):
        if run is None:
            c = cfg if strategy == "optimal" else dataclasses.replace(cfg, scheme="uniform")
            if strategy == "optimal" and cfg.scheme == "uniform":
                raise DomainError("optimal strategy needs a reflecting scheme")
            run = run_paths(params, f, boundary, y0_minus, theta0_minus, c, checkpoints=t)
        lookup = {float(x): i for i, x in enumerate(run.checkpoints)}
        cols = [lookup[float(x)] for x in t]
        ok = ~run.flagged
        G = np.column_stack([
            _g_values(value_fn, params, run.cp_Y[ok, j], run.cp_theta[ok, j], run.cp_D[ok, j], run.cp_L[ok, j])
            for j in cols
        ])
        n = int(ok.sum())
    elif strategy == "never-trade":
        Y, D = _never_trade_states(params, y0_minus, t, cfg.n_paths, cfg.seed)
        th = np.full_like(Y, float(theta0_minus))
        G = _g_values(value_fn, params, Y.ravel(), th.ravel(), D.ravel(), np.zeros(Y.size)).reshape(Y.shape)
        n = cfg.n_paths
    else:
        raise DomainError("strategy must be 'optimal', 'never-trade' or 'uniform-rate'")
    mean = G.mean(axis=0)
    se = G.std(axis=0, ddof=1) / math.sqrt(G.shape[0]) if G.shape[0] > 1 else np.zeros(G.shape[1])
    inc_se = np.where(t > 0, se, np.inf)
    # G_0 is deterministic, so the increment's error is the error of E[G_t]
    z = np.where(t > 0, (mean - g0) / np.where(inc_se > 0, inc_se, np.inf), 0.0)
    mean = np.where(t == 0, g0, mean)
    se = np.where(t == 0, 0.0, se)
    return DriftReport(strategy, t, mean, se, g0, z, n)
