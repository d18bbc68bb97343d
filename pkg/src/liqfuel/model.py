"""Model parameters, impact functions and numerical assumption checks."""

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .special import PhiEval

__all__ = [
    "ModelParams",
    "ImpactFunction",
    "AssumptionStatus",
    "AssumptionReport",
    "k_fn",
    "k_prime",
    "check_assumptions",
    "params_from_dict",
    "load_params",
    "DEFAULT_GRID",
]

DEFAULT_GRID = (-15.0, 15.0, 0.01)


@dataclass(frozen=True)
class ModelParams:
    """Scalars of the price and impact dynamics.

    ``delta = gamma - mu`` is allowed to be non-positive here so that
    :func:`check_assumptions` can report it; anything that needs the
    eigenfunction refuses such a set.
    """

    beta: float
    sigma_hat: float
    sigma: float
    rho: float
    gamma: float
    mu: float = 0.0
    s_bar0: float = 1.0

    def __post_init__(self):
        for name in ("beta", "sigma_hat", "sigma", "rho", "gamma", "mu", "s_bar0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise DomainError(f"{name} must be a finite number, got {v!r}")
        if self.beta <= 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.sigma_hat <= 0:
            raise DomainError(f"sigma_hat must be positive, got {self.sigma_hat}")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if abs(self.rho) > 1:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.s_bar0 <= 0:
            raise DomainError(f"s_bar0 must be positive, got {self.s_bar0}")

    @property
    def delta(self) -> float:
        return self.gamma - self.mu

    @property
    def drift_shift(self) -> float:
        """``sigma rho sigma_hat``: the impact drift under the price-weighted measure."""
        return self.sigma * self.rho * self.sigma_hat

    def eigenfunction(self, delta=None, shifted=True, tol=1e-10) -> PhiEval:
        """``Phi_delta`` for the generator with (shifted=True) or without the price drift."""
        d = self.delta if delta is None else delta
        if np.real(d) <= 0:
            raise DomainError(f"eigenvalue must be positive, got {d}")
        rho = self.rho if shifted else 0.0
        return PhiEval(d, self.beta, self.sigma_hat, self.sigma, rho, tol)

    def replace(self, **kw) -> "ModelParams":
        d = {k: getattr(self, k) for k in ("beta", "sigma_hat", "sigma", "rho", "gamma", "mu", "s_bar0")}
        d.update(kw)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("beta", "sigma_hat", "sigma", "rho", "gamma", "mu", "s_bar0")}


@dataclass(frozen=True)
class ImpactFunction:
    """Multiplicative price impact ``f`` with derivatives up to order three.

    Build with :meth:`exponential` or :meth:`analytic`; the analytic kind
    must declare the interval on which its callables may be evaluated.
    """

    kind: str
    lam: float = 1.0
    funcs: tuple = field(default=(), compare=False)
    domain: tuple = (-math.inf, math.inf)

    @classmethod
    def exponential(cls, lam: float) -> "ImpactFunction":
        if not (isinstance(lam, (int, float)) and math.isfinite(lam) and lam > 0):
            raise DomainError(f"lambda must be a positive finite number, got {lam!r}")
        return cls("exponential", float(lam))

    @classmethod
    def analytic(cls, f: Callable, df: Callable, d2f: Callable, d3f: Callable, domain) -> "ImpactFunction":
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise DomainError("analytic impact needs a non-empty working interval")
        return cls("analytic", math.nan, (f, df, d2f, d3f), (lo, hi))

    @property
    def is_exponential(self) -> bool:
        return self.kind == "exponential"

    def _check(self, y):
        y = np.asarray(y, dtype=float)
        if not self.is_exponential:
            lo, hi = self.domain
            if np.any(y < lo) or np.any(y > hi):
                raise DomainError(f"impact function evaluated outside its working interval [{lo}, {hi}]")
        return y

    def deriv(self, n: int, y):
        """``f^(n)(y)`` for n in 0..3."""
        y = self._check(y)
        if self.is_exponential:
            return self.lam**n * np.exp(self.lam * y)
        return np.asarray(self.funcs[n](y), dtype=float)

    def __call__(self, y):
        return self.deriv(0, y)

    def ratios(self, y):
        """``(f'/f, f''/f, f'''/f)`` at y."""
        y = self._check(y)
        if self.is_exponential:
            one = np.ones_like(y)
            return self.lam * one, self.lam**2 * one, self.lam**3 * one
        f0 = self.deriv(0, y)
        return self.deriv(1, y) / f0, self.deriv(2, y) / f0, self.deriv(3, y) / f0

    def integral(self, a, b):
        """``int_a^b f``; closed form for exponential, adaptive quadrature otherwise."""
        if self.is_exponential:
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            # e^{lam b} (1 - e^{-lam (b-a)}) / lam, accurate for short intervals
            return -np.exp(self.lam * b) * np.expm1(-self.lam * (b - a)) / self.lam
        a_arr, b_arr = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        self._check(a_arr)
        self._check(b_arr)
        out = np.empty(a_arr.shape)
        for idx in np.ndindex(a_arr.shape):
            out[idx] = quad(lambda x: float(self.funcs[0](x)), a_arr[idx], b_arr[idx],
                            epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return out if out.ndim else float(out)

    def integral_below(self, y, length):
        """``int_{y-length}^y f``, keeping full relative accuracy for tiny ``length``."""
        if self.is_exponential:
            y = np.asarray(y, dtype=float)
            return -np.exp(self.lam * y) * np.expm1(-self.lam * np.asarray(length, dtype=float)) / self.lam
        return self.integral(np.asarray(y, float) - np.asarray(length, float), y)

    def lam_max(self, grid=None) -> float:
        if self.is_exponential:
            return self.lam
        if grid is None:
            lo, hi = self.domain
            grid = np.linspace(lo, hi, 2001)
        return float(np.max(self.ratios(grid)[0]))

    def to_dict(self) -> dict:
        if not self.is_exponential:
            raise DomainError("only the exponential impact has a JSON form")
        return {"kind": "exponential", "lambda": self.lam}


def k_fn(params: ModelParams, f: ImpactFunction, y):
    """``k(y) = sigma_hat^2/2 f''/f - (beta + delta) + (sigma rho sigma_hat - beta y) f'/f``."""
    y = np.asarray(y, dtype=float)
    lam, k2, _ = f.ratios(y)
    return 0.5 * params.sigma_hat**2 * k2 - (params.beta + params.delta) + (params.drift_shift - params.beta * y) * lam


def k_prime(params: ModelParams, f: ImpactFunction, y):
    """Analytic derivative of :func:`k_fn`."""
    y = np.asarray(y, dtype=float)
    lam, k2, k3 = f.ratios(y)
    dlam = k2 - lam * lam
    dk2 = k3 - k2 * lam
    return 0.5 * params.sigma_hat**2 * dk2 - params.beta * lam + (params.drift_shift - params.beta * y) * dlam


VERIFIED = "verified-on-grid"
VIOLATED = "violated"
NOT_CHECKABLE = "not-checkable"


@dataclass(frozen=True)
class AssumptionStatus:
    status: str
    detail: str = ""
    witness: dict | None = None

    def to_dict(self) -> dict:
        d = {"status": self.status, "detail": self.detail}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


@dataclass(frozen=True)
class AssumptionReport:
    items: dict
    grid: tuple

    @property
    def ok(self) -> bool:
        return all(s.status == VERIFIED for s in self.items.values())

    def failures(self) -> dict:
        return {k: s for k, s in self.items.items() if s.status != VERIFIED}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "grid": {"lo": self.grid[0], "hi": self.grid[1], "n": self.grid[2]},
            "assumptions": {k: s.to_dict() for k, s in self.items.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _witness(y, lhs, rhs):
    return {"y": float(y), "lhs": float(lhs), "rhs": float(rhs)}


def _first_sign_change(g):
    s = np.sign(g)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    return idx


def _refine(grid, margins, tiny=1e-6, factor=10):
    """Insert ``factor``-times finer points around grid cells with |margin| < tiny."""
    near = np.zeros(grid.size, dtype=bool)
    for m in margins:
        near |= np.abs(m) < tiny
    if not np.any(near) or grid.size < 2:
        return grid
    h = np.diff(grid).min()
    extra = [grid[i] + h * np.arange(-factor, factor + 1) / factor for i in np.nonzero(near)[0]]
    return np.unique(np.concatenate([grid, *extra]))


def _margins(params, f, phi, y):
    """Signed margins that must be positive; returns a dict of arrays."""
    L = phi.logs(y, 4)
    g1 = np.exp(L[1] - L[0])
    q = np.exp(L[2] - L[1])
    # (Phi'/Phi)' = G1^2 (Phi Phi''/Phi'^2 - 1) and likewise one order up
    dg1 = g1 * g1 * np.expm1(L[0] + L[2] - 2 * L[1])
    dq = q * q * np.expm1(L[1] + L[3] - 2 * L[2])
    lam, k2, _ = f.ratios(y)
    dlam = k2 - lam * lam
    if f.is_exponential:
        # positive by construction; avoid evaluating e^{lam y} at large |lam y|
        fv = dfv = np.ones_like(y)
    else:
        fv, dfv = f(y), f.deriv(1, y)
    return {
        "f": fv,
        "df": dfv,
        "ii": dg1 - dlam,
        "iii": dq - dlam,
        "v": -k_prime(params, f, y),
        "g1": g1,
        "q": q,
        "lam": lam,
        "dlam": dlam,
        "dg1": dg1,
        "dq": dq,
    }


def check_assumptions(params: ModelParams, f: ImpactFunction, y_grid=None) -> AssumptionReport:
    """Check the six standing assumptions pointwise on a grid.

    The grid defaults to [-15, 15] step 0.01 and is extended to cover
    ``[y_inf - 5, y0 + 5]`` when both crossings are found on it.  Cells
    where a margin falls below 1e-6 are refined tenfold.
    """
    if y_grid is None:
        lo, hi, h = DEFAULT_GRID
        y = np.linspace(lo, hi, int(round((hi - lo) / h)) + 1)
    else:
        y = np.unique(np.asarray(y_grid, dtype=float))
    if not f.is_exponential:
        dlo, dhi = f.domain
        y = y[(y >= dlo) & (y <= dhi)]
    if y.size < 2:
        raise DomainError("assumption grid must contain at least two points inside the impact domain")

    items = {}
    if params.delta > 0:
        items["i"] = AssumptionStatus(VERIFIED, "delta = gamma - mu > 0")
    else:
        items["i"] = AssumptionStatus(VIOLATED, "delta = gamma - mu must be positive",
                                      {"delta": params.delta, "gamma": params.gamma, "mu": params.mu})
        for key in ("ii", "iii", "iv", "v", "vi"):
            items[key] = AssumptionStatus(NOT_CHECKABLE, "needs delta > 0")
        return AssumptionReport(items, (float(y[0]), float(y[-1]), int(y.size)))

    phi = params.eigenfunction()
    m = _margins(params, f, phi, y)
    # two-pass: extend to cover the endpoints' neighbourhoods when they are visible
    c0 = _first_sign_change(m["lam"] - m["g1"])
    c1 = _first_sign_change(m["lam"] - m["q"])
    if c0.size and c1.size:
        want_lo, want_hi = y[c1[0]] - 5.0, y[c0[-1]] + 5.0
        if f.is_exponential:
            step = np.diff(y).min()
            ext = []
            if want_lo < y[0]:
                ext.append(np.arange(want_lo, y[0], step))
            if want_hi > y[-1]:
                ext.append(np.arange(y[-1] + step, want_hi + step, step))
            if ext:
                y = np.unique(np.concatenate([y, *ext]))
                m = _margins(params, f, phi, y)
    y_ref = _refine(y, [m["ii"], m["iii"], m["v"]])
    if not f.is_exponential:
        y_ref = y_ref[(y_ref >= f.domain[0]) & (y_ref <= f.domain[1])]
    if y_ref.size != y.size:
        y = y_ref
        m = _margins(params, f, phi, y)
    grid = (float(y[0]), float(y[-1]), int(y.size))

    bad = np.nonzero((m["f"] <= 0) | (m["df"] <= 0))[0]
    if bad.size:
        i = bad[0]
        items["ii"] = AssumptionStatus(VIOLATED, "f and f' must be positive", _witness(y[i], m["f"][i], m["df"][i]))
    else:
        bad = np.nonzero(m["ii"] <= 0)[0]
        if bad.size:
            i = bad[0]
            items["ii"] = AssumptionStatus(VIOLATED, "(f'/f)' < (Phi'/Phi)'", _witness(y[i], m["dlam"][i], m["dg1"][i]))
        else:
            items["ii"] = AssumptionStatus(VERIFIED, "f, f' > 0 and (f'/f)' < (Phi'/Phi)'")

    bad = np.nonzero(m["iii"] <= 0)[0]
    if bad.size:
        i = bad[0]
        items["iii"] = AssumptionStatus(VIOLATED, "(f'/f)' < (Phi''/Phi')'", _witness(y[i], m["dlam"][i], m["dq"][i]))
    else:
        items["iii"] = AssumptionStatus(VERIFIED, "(f'/f)' < (Phi''/Phi')'")

    lam = m["lam"]
    if np.all(lam > 0) and np.all(np.isfinite(lam)):
        lmax = f.lam_max(y)
        items["iv"] = AssumptionStatus(VERIFIED, f"0 < f'/f <= lambda_max = {lmax:.17g}")
    else:
        i = int(np.argmin(lam))
        items["iv"] = AssumptionStatus(VIOLATED, "f'/f must be positive and bounded", _witness(y[i], lam[i], 0.0))

    kv = k_fn(params, f, y)
    bad = np.nonzero((m["v"] <= 0) | (np.diff(kv, append=-np.inf) >= 0))[0]
    if bad.size:
        i = bad[0]
        items["v"] = AssumptionStatus(VIOLATED, "k must be strictly decreasing", _witness(y[i], -m["v"][i], 0.0))
    else:
        items["v"] = AssumptionStatus(VERIFIED, "k strictly decreasing")

    c0 = _first_sign_change(m["lam"] - m["g1"])
    c1 = _first_sign_change(m["lam"] - m["q"])
    if c0.size and c1.size:
        items["vi"] = AssumptionStatus(
            VERIFIED, f"crossings near y0 ~ {y[c0[0]]:.6g} and y_inf ~ {y[c1[0]]:.6g}"
        )
    else:
        which = "f'/f - Phi'/Phi" if not c0.size else "f'/f - Phi''/Phi'"
        g = (m["lam"] - m["g1"]) if not c0.size else (m["lam"] - m["q"])
        items["vi"] = AssumptionStatus(
            NOT_CHECKABLE,
            f"no sign change of {which} on the grid",
            {"y_lo": grid[0], "value_lo": float(g[0]), "y_hi": grid[1], "value_hi": float(g[-1])},
        )
    return AssumptionReport(items, grid)


_PARAM_KEYS = ("beta", "sigma_hat", "sigma", "rho", "gamma", "mu", "s_bar0")


def params_from_dict(d: dict) -> tuple[ModelParams, ImpactFunction]:
    """Validate the JSON parameter schema and build the model objects."""
    if not isinstance(d, dict):
        raise DomainError("parameter file must hold a JSON object")
    unknown = set(d) - set(_PARAM_KEYS) - {"impact"}
    if unknown:
        raise DomainError(f"unknown parameter keys: {sorted(unknown)}")
    missing = [k for k in _PARAM_KEYS + ("impact",) if k not in d]
    if missing:
        raise DomainError(f"missing parameter keys: {missing}")
    vals = {}
    for k in _PARAM_KEYS:
        v = d[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise DomainError(f"{k} must be a number, got {v!r}")
        vals[k] = float(v)
    imp = d["impact"]
    if not isinstance(imp, dict) or imp.get("kind") != "exponential":
        raise DomainError('impact must be {"kind": "exponential", "lambda": <number>}')
    if set(imp) != {"kind", "lambda"}:
        raise DomainError(f"impact keys must be exactly kind and lambda, got {sorted(imp)}")
    lam = imp["lambda"]
    if isinstance(lam, bool) or not isinstance(lam, (int, float)):
        raise DomainError(f"impact.lambda must be a number, got {lam!r}")
    return ModelParams(**vals), ImpactFunction.exponential(float(lam))


def load_params(path) -> tuple[ModelParams, ImpactFunction]:
    with open(path) as fh:
        return params_from_dict(json.load(fh))
