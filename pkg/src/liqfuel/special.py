"""Hermite functions of negative order and the OU eigenfunctions built on them.

For ``Re(nu) < 0`` the Hermite function has the integral representation

    H_nu(x) = Gamma(-nu)^{-1} * int_0^inf exp(-t^2 - 2 x t) t^(-nu-1) dt,

which is what this module evaluates, in log scale throughout so that
``exp(x^2)``-sized values for very negative ``x`` never overflow.  The order
may be complex (needed when Laplace transforms are inverted numerically);
the argument is always real.

The positive increasing eigenfunction of the OU generator

    sigma_hat^2/2 phi'' + (sigma rho sigma_hat - beta y) phi' - delta phi = 0

is ``Phi(y) = H_{-delta/beta}(z(y))`` with
``z(y) = (sigma rho sigma_hat - beta y) / (sqrt(beta) sigma_hat)``.  Its
derivatives follow from ``H_nu' = 2 nu H_{nu-1}`` so every order is another
Hermite function, never a finite difference.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, loggamma

from .errors import DomainError, NumericError

__all__ = [
    "log_hermite",
    "hermite",
    "PhiEval",
    "phi",
    "turan_margin",
    "QuotientReport",
    "hermite_quotient_probe",
]

ASYMPTOTIC_SWITCH = 30.0
DEFAULT_TOL = 1e-10

_NEAR_TERMS = 48
_PROBE_POINTS = 320
_BASE_NODES = 257
_MAX_NODES = 16385
_WINDOW_DROP = 45.0  # exp(-45) ~ 3e-20 relative to the peak


def _is_complex(nu):
    return np.iscomplexobj(nu) and np.imag(nu) != 0


def _log_gamma(s):
    if np.iscomplexobj(s):
        return loggamma(complex(s))
    return float(gammaln(s))


def _near_part(a, z, tau0):
    """int_0^tau0 t^a exp(-t^2 - 2 z t) dt via the Hermite generating function."""
    # exp(-t^2 - 2zt) = sum_k H_k(-z) t^k / k!; scaled terms h_k = H_k(-z) tau0^k / k!
    u2t = -2.0 * z * tau0
    t2 = 2.0 * tau0 * tau0
    h_prev = np.ones_like(z)
    h_cur = u2t.copy()
    total = h_prev / (a + 1.0) + h_cur / (a + 2.0)
    for k in range(1, _NEAR_TERMS):
        h_next = (u2t * h_cur - t2 * h_prev) / (k + 1)
        total = total + h_next / (a + k + 2.0)
        h_prev, h_cur = h_cur, h_next
    return np.exp((a + 1.0) * np.log(tau0)) * total


def _far_log_integrand(a, z, tau0, v):
    # t = tau0 + exp(v - e^{-v}) maps (-inf, inf) onto (tau0, inf) with
    # doubly exponential decay of dt/dv at the left end.
    ev = np.exp(-v)
    s = v - ev
    t = tau0 + np.exp(s)
    log_jac = s + np.log1p(ev)
    return a * np.log(t) - t * t - 2.0 * z * t + log_jac, t


def _log_integral_quadrature(a, z, tol):
    """log of int_0^inf t^a exp(-t^2 - 2 z t) dt for a 1-d array ``z``."""
    z = np.asarray(z, dtype=float)
    m = z.size
    tau0 = 0.5 / (1.0 + np.abs(z))

    v_lo = np.full(m, -4.0)
    v_hi = np.log(10.0 + np.maximum(-z, 0.0)) + 0.25
    probes = max(_PROBE_POINTS, int(40 * (np.max(np.abs(z), initial=0.0) + 8)))
    s = np.linspace(0.0, 1.0, probes)
    vp = v_lo[:, None] + (v_hi - v_lo)[:, None] * s[None, :]
    psi, _ = _far_log_integrand(a, z[:, None], tau0[:, None], vp)
    psi_r = psi.real if np.iscomplexobj(psi) else psi
    peak = psi_r.max(axis=1)
    keep = psi_r >= (peak - _WINDOW_DROP)[:, None]
    first = np.argmax(keep, axis=1)
    last = probes - 1 - np.argmax(keep[:, ::-1], axis=1)
    step = (v_hi - v_lo) / (probes - 1)
    va = np.maximum(v_lo, vp[np.arange(m), first] - 2.0 * step)
    vb = np.minimum(v_hi, vp[np.arange(m), last] + 2.0 * step)

    nodes = _BASE_NODES
    if np.iscomplexobj(a):
        # enough nodes per oscillation of t^(i Im a) across the window
        ta = tau0 + np.exp(va - np.exp(-va))
        tb = tau0 + np.exp(vb - np.exp(-vb))
        osc = abs(np.imag(a)) * np.max(np.log(tb / ta)) / (2 * np.pi)
        nodes = max(nodes, int(32 * osc) | 1)

    near = _near_part(a, z, tau0)
    while True:
        nodes = min(nodes, _MAX_NODES)
        r = np.linspace(0.0, 1.0, nodes)
        v = va[:, None] + (vb - va)[:, None] * r[None, :]
        h = (vb - va) / (nodes - 1)
        psi, _ = _far_log_integrand(a, z[:, None], tau0[:, None], v)
        psi_r = psi.real if np.iscomplexobj(psi) else psi
        top = psi_r.max(axis=1)
        w = np.exp(psi - top[:, None])
        t_fine = h * (w.sum(axis=1) - 0.5 * (w[:, 0] + w[:, -1]))
        wc = w[:, ::2]
        t_coarse = 2.0 * h * (wc.sum(axis=1) - 0.5 * (wc[:, 0] + wc[:, -1]))

        total = t_fine + near * np.exp(-top)
        scale = np.abs(total)
        # exponential convergence: the fine rule's error is ~ (h vs 2h gap)**2
        err = (np.abs(t_fine - t_coarse) / scale) ** 2
        # oscillating complex integrands lose digits to cancellation
        cancel = (h * np.abs(w).sum(axis=1) + np.abs(near) * np.exp(-top)) / scale
        err = np.maximum(err, 4e-16 * cancel)
        if np.all(err <= tol) or nodes >= _MAX_NODES:
            break
        nodes = 2 * nodes - 1
    if not np.all(err <= tol * 10):
        raise NumericError("Hermite quadrature did not reach tolerance", residual=float(np.max(err)))
    return top + np.log(total)


def _asymptotic_log_integral(a, z):
    """Large-|z| expansions of log(Gamma(-nu) H_nu(z)), or None if not usable."""
    z = np.asarray(z, dtype=float)
    cplx = np.iscomplexobj(a)
    series = np.ones(z.shape, dtype=complex if cplx else float)
    term = np.ones_like(series)
    pos = z > 0
    inv = 1.0 / (z * z)
    for k in range(80):
        # z > 0: Watson-type expansion of the Laplace integral around t = 0;
        # z < 0: expansion of t^a about the Gaussian peak at t = -z.
        ratio_pos = -(a + 1.0 + 2 * k) * (a + 2.0 + 2 * k) / ((k + 1) * 4.0) * inv
        ratio_neg = (a - 2 * k) * (a - 2 * k - 1) / (4.0 * (k + 1)) * inv
        term = term * np.where(pos, ratio_pos, ratio_neg)
        series = series + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(series)):
            break
    else:
        return None
    lz = np.log(np.abs(z))
    out_pos = _log_gamma(a + 1.0) - (a + 1.0) * (np.log(2.0) + lz)
    out_neg = 0.5 * np.log(np.pi) + z * z + a * lz
    return np.where(pos, out_pos, out_neg) + np.log(series)


def log_hermite(nu, x, tol=DEFAULT_TOL):
    """Natural log of ``H_nu(x)`` for ``Re(nu) < 0``.

    ``nu`` is a scalar (real or complex), ``x`` a real scalar or array.  The
    result has the shape of ``x``; it is complex when ``nu`` is complex (any
    branch of the log is returned, so only ``exp`` of it or differences of
    such logs are meaningful).
    """
    if np.real(nu) >= 0:
        raise DomainError(f"Hermite representation needs Re(nu) < 0, got nu={nu}")
    nu = complex(nu) if _is_complex(nu) else float(np.real(nu))
    x_arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x_arr).ravel()
    a = -nu - 1.0
    out = np.empty(flat.shape, dtype=complex if isinstance(nu, complex) else float)

    far = np.abs(flat) > ASYMPTOTIC_SWITCH
    if np.any(far):
        asym = _asymptotic_log_integral(a, flat[far]) if abs(a) + 2 < ASYMPTOTIC_SWITCH else None
        if asym is None:
            far[:] = False
        else:
            out[far] = asym
    if np.any(~far):
        out[~far] = _log_integral_quadrature(a, flat[~far], tol)
    out = out - _log_gamma(-nu)
    if x_arr.ndim == 0:
        return out[0]
    return out.reshape(x_arr.shape)


def hermite(nu, x, tol=DEFAULT_TOL):
    """``H_nu(x)`` for ``Re(nu) < 0``; positive and decreasing in x for real nu."""
    return np.exp(log_hermite(nu, x, tol))


@dataclass(frozen=True)
class PhiEval:
    """The increasing eigenfunction ``Phi_delta`` and its derivatives.

    ``delta`` may be complex (transform variable of a Laplace transform);
    all other fields are real model constants.
    """

    delta: complex
    beta: float
    sigma_hat: float
    sigma: float = 0.0
    rho: float = 0.0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if np.real(self.delta) <= 0:
            raise DomainError(f"eigenvalue must have positive real part, got {self.delta}")
        if self.beta <= 0 or self.sigma_hat <= 0:
            raise DomainError("beta and sigma_hat must be positive")
        if abs(self.rho) > 1:
            raise DomainError("rho must lie in [-1, 1]")

    @property
    def nu(self):
        return -self.delta / self.beta

    @property
    def shift(self):
        """Mean-reversion level ``sigma rho sigma_hat / beta`` of the OU drift."""
        return self.sigma * self.rho * self.sigma_hat / self.beta

    def z(self, x):
        return (self.sigma * self.rho * self.sigma_hat - self.beta * np.asarray(x, dtype=float)) / (
            np.sqrt(self.beta) * self.sigma_hat
        )

    def log_coef(self, n):
        """log of c_n = prod_{k<n} 2 (delta + k beta) / (sigma_hat sqrt(beta))."""
        c = 0.0
        for k in range(n):
            c = c + np.log(2.0 * (self.delta + k * self.beta) / (self.sigma_hat * np.sqrt(self.beta)))
        return c

    def log(self, n, x):
        """log of the n-th derivative at ``x``."""
        if n < 0:
            raise DomainError("derivative order must be non-negative")
        return self.log_coef(n) + log_hermite(self.nu - n, self.z(x), self.tol)

    def __call__(self, n, x):
        return np.exp(self.log(n, x))

    def ratio(self, n, x):
        """``Phi^(n) / Phi^(n-1)`` evaluated without forming either factor."""
        return np.exp(self.log(n, x) - self.log(n - 1, x))

    def logs(self, x, orders=4):
        """Stacked logs of ``Phi, Phi', ..., Phi^(orders-1)`` (leading axis = order)."""
        return np.stack([self.log(n, x) for n in range(orders)])

    def with_delta(self, delta):
        return PhiEval(delta, self.beta, self.sigma_hat, self.sigma, self.rho, self.tol)


def phi(cfg, n, x):
    """``Phi^(n)_delta(x)`` for n in 0..3."""
    if n not in (0, 1, 2, 3):
        raise DomainError(f"derivative order must be 0..3, got {n}")
    return cfg(n, x)


def turan_margin(cfg, n, x):
    """``Phi^(n-1) Phi^(n+1) - (Phi^(n))^2``, strictly positive for n >= 1."""
    if n not in (1, 2):
        raise DomainError(f"Turan margin is exposed for n in (1, 2), got {n}")
    lo, mid, hi = cfg.log(n - 1, x), cfg.log(n, x), cfg.log(n + 1, x)
    return np.exp(lo + hi) * -np.expm1(2.0 * mid - lo - hi)


def relative_turan_margin(cfg, n, x):
    """``1 - (Phi^(n))^2 / (Phi^(n-1) Phi^(n+1))``, in (0, 1)."""
    lo, mid, hi = cfg.log(n - 1, x), cfg.log(n, x), cfg.log(n + 1, x)
    return -np.expm1(2.0 * mid - lo - hi)


@dataclass(frozen=True)
class QuotientReport:
    nu: float
    x: np.ndarray
    quotient: np.ndarray
    decreasing: bool
    max_increase: float


def hermite_quotient_probe(nu, x_grid, tol=DEFAULT_TOL):
    """Tabulate ``H_{nu-1}^2 / (H_nu H_{nu-2})`` and report whether it decreases.

    Diagnostic only: the monotonicity is conjectured, never asserted here.
    """
    x = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise DomainError("grid must be strictly ascending")
    q = np.exp(2 * log_hermite(nu - 1, x, tol) - log_hermite(nu, x, tol) - log_hermite(nu - 2, x, tol))
    inc = np.diff(q)
    max_inc = float(inc.max()) if inc.size else 0.0
    return QuotientReport(float(nu), x, q, bool(np.all(inc < 0)), max_inc)
