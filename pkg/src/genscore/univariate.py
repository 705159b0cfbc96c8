"""Univariate truncated normal: weighted score matching estimators of the mean
and variance and their asymptotic variances.

The data follow N(mu0, sigma0^2) restricted to a finite union of intervals.
With weight w = h(phi_C(x)) = phi_C(x)**alpha the estimators are

    mu_hat     = sum(w x - sigma0^2 w') / sum(w)
    sigma2_hat = sum(w (x - mu0)^2) / sum(w + w' (x - mu0))

and their limiting variances are ratios of expectations that we evaluate by
adaptive Simpson quadrature on every interval of the domain.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import domain as dom
from .errors import GenscoreError
from .intervals import INF, Interval, IntervalUnion
from .weights import WeightSpec, weight_matrices

__all__ = [
    "UniSpec", "QuadratureError", "adaptive_simpson", "expectations",
    "estimate_mu", "estimate_sigma_sq", "asymptotic_var_mu",
    "asymptotic_var_sigma_sq", "quantile_C", "phi_cdf", "variance_curve",
    "write_curve_csv", "named_domain", "join_points", "curve_from_json",
]

MAX_DEPTH = 50
MAX_EVALS = 2_000_000
TAIL_REL = 1e-16


class QuadratureError(GenscoreError, ArithmeticError):
    pass


def named_domain(name: str) -> IntervalUnion:
    """The three example unions: D2 two tails, D3 two short intervals, D1 both."""
    d2 = [Interval(-INF, -1.5, False, True), Interval(1.5, INF, True, False)]
    d3 = [Interval(-1.0, -0.75), Interval(0.75, 1.0)]
    key = name.strip().upper()
    if key == "D1":
        return IntervalUnion(d2 + d3)
    if key == "D2":
        return IntervalUnion(d2)
    if key == "D3":
        return IntervalUnion(d3)
    if key in ("R", "REAL"):
        return IntervalUnion.real_line()
    raise ValueError(f"unknown named domain {name!r}")


@dataclass(frozen=True)
class UniSpec:
    domain: IntervalUnion
    mu0: float = 0.0
    sigma0_sq: float = 1.0
    alpha: float = 1.0
    pi: float | None = None
    C: float | None = None

    def __post_init__(self):
        if self.domain.is_empty or not self.domain.total_length > 0:
            raise ValueError("the domain needs positive length")
        if not self.sigma0_sq > 0:
            raise ValueError("sigma0_sq must be positive")
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if self.pi is not None and not 0 < self.pi <= 1:
            raise ValueError("pi must be in (0, 1]")
        if self.C is not None and not self.C > 0:
            raise ValueError("C must be positive")

    @property
    def sigma0(self):
        return math.sqrt(self.sigma0_sq)

    def truncation(self) -> float:
        if self.C is not None:
            return float(self.C)
        if self.pi is not None:
            return quantile_C(self.domain, self.mu0, self.sigma0_sq, self.pi)
        return INF


# ---------------------------------------------------------------------------
# estimators

def _weights(spec: UniSpec, data, C=None):
    x = np.asarray(data, dtype=float).reshape(-1, 1)
    C = spec.truncation() if C is None else C
    W, dW = weight_matrices(WeightSpec(spec.alpha), dom.ProductUnion([spec.domain]), [C], x)
    return x[:, 0], W[:, 0], dW[:, 0]


def estimate_mu(spec: UniSpec, data, C=None) -> float:
    x, w, dw = _weights(spec, data, C)
    den = w.sum()
    if den == 0:
        raise ZeroDivisionError("all weights are zero")
    return float((w @ x - spec.sigma0_sq * dw.sum()) / den)


def estimate_sigma_sq(spec: UniSpec, data, C=None) -> float:
    x, w, dw = _weights(spec, data, C)
    d = x - spec.mu0
    den = (w + dw * d).sum()
    if den == 0:
        raise ZeroDivisionError("zero denominator")
    return float((w * d * d).sum() / den)


# ---------------------------------------------------------------------------
# quadrature

def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth, stats):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    h = (b - a) / 12.0
    left = h * (fa + 4 * flm + fm)
    right = h * (fm + 4 * frm + fb)
    err = left + right - whole
    stats["evals"] += 2
    if stats["evals"] > MAX_EVALS:
        raise QuadratureError("adaptive Simpson exceeded its evaluation budget")
    if depth >= MAX_DEPTH:
        stats["capped"] = max(stats["capped"], float(np.max(np.abs(err))))
        return left + right + err / 15.0
    if np.all(np.abs(err) <= 15.0 * tol):
        return left + right + err / 15.0
    return (_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, stats)
            + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, stats))


def adaptive_simpson(f, a, b, rtol=1e-11, atol=1e-300, stats=None):
    """Adaptive Simpson for vector-valued ``f`` on a finite [a, b].

    The per-component tolerance is ``rtol`` times a coarse estimate of the
    integral's magnitude (plus ``atol``).  The recursion stops at depth 50.
    """
    if stats is None:
        stats = {"capped": 0.0, "evals": 0}
    if b <= a:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    xs = np.linspace(a, b, 9)
    fs = [f(x) for x in xs]
    scale = (b - a) * np.max(np.abs(fs), axis=0)
    tol = rtol * scale + atol
    fa, fm, fb = fs[0], fs[4], fs[8]
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0, stats)


def _integrand(spec: UniSpec, C, lo, hi, with_deriv=True):
    """Vector integrand on one component [lo, hi] of the domain."""
    mu, s2, alpha = spec.mu0, spec.sigma0_sq, spec.alpha

    def f(x, near=None, side=0.0):
        # ``near``: exact distance to the endpoint on ``side`` (+1 left, -1 right),
        # passed by the endpoint substitution to avoid cancellation in hi - x
        dens = math.exp(-(x - mu) ** 2 / (2 * s2))
        if near is not None:
            phi, sgn = (C, 0.0) if C <= near else (near, side)
        else:
            dl, dh = x - lo, hi - x
            d = min(dl, dh)
            if C <= d:
                phi, sgn = C, 0.0
            else:
                phi, sgn = d, (1.0 if dl <= dh else -1.0)
        if alpha == 0 or not with_deriv:
            w = 1.0 if alpha == 0 else phi ** alpha
            dw = 0.0
        else:
            w = phi ** alpha
            if sgn == 0.0:
                dw = 0.0
            elif alpha == 1:
                dw = sgn
            elif phi == 0.0:
                # only reached at an endpoint, where the substituted integrand vanishes
                dw = 0.0
            else:
                dw = alpha * phi ** (alpha - 1) * sgn
        z2 = (x - mu) ** 2
        return dens * np.array([1.0, w, w * w, dw * dw, w * z2, w * w * z2, dw * dw * z2])

    return f


_NQ = 7  # 1, w, w^2, w'^2, w z^2, w^2 z^2, w'^2 z^2  with z = x - mu0


def _breakpoints(lo, hi, a, b, C):
    """Kinks of phi_C on the component [lo, hi], restricted to the finite range [a, b]."""
    pts = {a, b}
    cand = []
    if math.isfinite(lo) and math.isfinite(hi):
        cand.append(0.5 * (lo + hi))
    if math.isfinite(C):
        cand += [lo + C, hi - C]
    for v in cand:
        if a < v < b and math.isfinite(v):
            pts.add(v)
    return sorted(pts)


def _tail_end(f, anchor, direction, scale):
    """Doubling search until every component falls below 1e-16 of its max."""
    fmax = np.abs(f(anchor))
    step = scale
    for _ in range(200):
        x = anchor + direction * step
        fx = np.abs(f(x))
        fmax = np.maximum(fmax, fx)
        if np.all(fx <= TAIL_REL * np.maximum(fmax, 1e-300)):
            return x
        step *= 2.0
    raise QuadratureError("tail clipping did not terminate")


def _integrate_piece(f, a, b, alpha, stats, left_sing, right_sing):
    """Integrate on finite [a, b]; substitute near an endpoint where w' blows up."""
    p = 1
    if alpha > 0 and alpha != int(alpha):
        # x = end + s**p with p > 1/(2 alpha - 1) makes w'^2 dx vanish at s = 0
        p = max(2, math.floor(1.0 / (2 * alpha - 1)) + 1) if alpha > 0.5 else 2
    if p == 1 or not (left_sing or right_sing):
        return adaptive_simpson(f, a, b, stats=stats)
    L = b - a
    if left_sing and right_sing:
        mid = 0.5 * (a + b)
        return (_integrate_piece(f, a, mid, alpha, stats, True, False)
                + _integrate_piece(f, mid, b, alpha, stats, False, True))
    if left_sing:
        g = lambda s: f(a + s ** p, s ** p, 1.0) * (p * s ** (p - 1))
    else:
        g = lambda s: f(b - s ** p, s ** p, -1.0) * (p * s ** (p - 1))
    return adaptive_simpson(g, 0.0, L ** (1.0 / p), stats=stats)


def expectations(spec: UniSpec, C=None):
    """Expectations of (1, w, w^2, w'^2, w z^2, w^2 z^2, w'^2 z^2) under the truncated normal.

    Returns ``(values, Z)`` with ``Z`` the quadrature normalizing constant.
    Entries involving w' are ``inf`` when the integral diverges, which happens
    for 0 < alpha <= 1/2 on a domain with a finite endpoint.
    """
    C = spec.truncation() if C is None else float(C)
    alpha = spec.alpha
    has_end = any(math.isfinite(iv.lower) or math.isfinite(iv.upper) for iv in spec.domain)
    divergent = has_end and 0 < alpha <= 0.5
    total = np.zeros(_NQ)
    stats = {"capped": 0.0, "evals": 0}
    sigma = spec.sigma0
    for iv in spec.domain:
        lo, hi = iv.lower, iv.upper
        f = _integrand(spec, C, lo, hi, with_deriv=not divergent)
        if math.isfinite(lo):
            a = lo
        else:
            a = _tail_end(f, min(hi, spec.mu0), -1, sigma)
        b = hi if math.isfinite(hi) else _tail_end(f, max(a, spec.mu0), +1, sigma)
        pts = _breakpoints(lo, hi, a, b, C)
        for u, v in zip(pts[:-1], pts[1:]):
            # w' can blow up only next to a finite endpoint
            ls = u == lo
            rs = v == hi
            total += _integrate_piece(f, u, v, alpha, stats, ls, rs)
    Z = total[0]
    if not Z > 0:
        raise QuadratureError("the normal density has no mass on the domain")
    if stats["capped"] > 1e-8 * float(np.max(np.abs(total))):
        raise QuadratureError(f"quadrature did not reach tolerance (error {stats['capped']:.2e})")
    vals = total / Z
    if divergent:
        vals[[3, 6]] = INF
    return vals, Z


def asymptotic_var_mu(spec: UniSpec, C=None) -> float:
    e, _ = expectations(spec, C)
    s2 = spec.sigma0_sq
    return float((s2 * e[2] + s2 * s2 * e[3]) / e[1] ** 2)


def asymptotic_var_sigma_sq(spec: UniSpec, C=None) -> float:
    e, _ = expectations(spec, C)
    s2 = spec.sigma0_sq
    return float((2 * s2 ** 3 * e[5] + s2 ** 4 * e[6]) / e[4] ** 2)


# ---------------------------------------------------------------------------
# truncation point from a quantile of phi_inf(X)

def _log_mass(lo, hi, mu, sigma):
    zl, zu = (lo - mu) / sigma, (hi - mu) / sigma
    if zu <= zl:
        return -INF
    if zl >= 0:
        # upper tail: Q(zl) - Q(zu), both via log_ndtr(-z)
        la, lb = log_ndtr(-zl), log_ndtr(-zu)
    elif zu <= 0:
        la, lb = log_ndtr(zu), log_ndtr(zl)
    else:
        return math.log(ndtr(zu) - ndtr(zl))
    return float(la + np.log(-np.expm1(lb - la)))


def phi_cdf(domain: IntervalUnion, mu, sigma_sq, C) -> float:
    """P(phi_inf(X) <= C) for X ~ N(mu, sigma_sq) truncated to ``domain``."""
    sigma = math.sqrt(sigma_sq)
    logs_all, logs_in = [], []
    for iv in domain:
        lo, hi = iv.lower, iv.upper
        logs_all.append(_log_mass(lo, hi, mu, sigma))
        if math.isfinite(lo) and math.isfinite(hi) and 2 * C >= hi - lo:
            logs_in.append(logs_all[-1])
            continue
        if math.isfinite(lo):
            logs_in.append(_log_mass(lo, min(hi, lo + C), mu, sigma))
        if math.isfinite(hi):
            logs_in.append(_log_mass(max(lo, hi - C), hi, mu, sigma))
    la = np.logaddexp.reduce(logs_all)
    li = np.logaddexp.reduce(logs_in) if logs_in else -INF
    return float(min(1.0, math.exp(li - la)))


def quantile_C(domain: IntervalUnion, mu, sigma_sq, pi, tol=1e-10) -> float:
    """C with P(phi_inf(X) <= C) = pi, by bisection to absolute ``tol``."""
    if not 0 < pi <= 1:
        raise ValueError("pi must be in (0, 1]")
    if not any(math.isfinite(iv.lower) or math.isfinite(iv.upper) for iv in domain):
        # no boundary at all: phi_inf is infinite everywhere
        return INF
    bounded = all(math.isfinite(iv.lower) and math.isfinite(iv.upper) for iv in domain)
    if bounded:
        cmax = max(0.5 * iv.length for iv in domain)
        if pi == 1:
            return cmax
    elif pi == 1:
        return INF
    else:
        cmax = math.sqrt(sigma_sq)
        while phi_cdf(domain, mu, sigma_sq, cmax) < pi:
            cmax *= 2.0
            if cmax > 1e300:
                return INF
    lo, hi = 0.0, cmax
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi_cdf(domain, mu, sigma_sq, mid) < pi:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def join_points(domain: IntervalUnion):
    """Half-lengths of the bounded components: where the curves change regime."""
    return sorted({0.5 * iv.length for iv in domain
                   if math.isfinite(iv.lower) and math.isfinite(iv.upper)})


def variance_curve(domain: IntervalUnion, mu0=0.0, sigma0_sq=1.0, alphas=(0.5, 1.0, 1.5, 2.0),
                   pis=None, include_joins=True):
    """Rows (alpha, pi, C, log_var_mu, log_var_sigma_sq) over a grid of quantiles.

    With ``include_joins`` the grid also holds, exactly, the truncation points
    equal to the half-lengths of bounded components.
    """
    if pis is None:
        pis = np.round(np.arange(1, 51) / 50.0, 10)
    cells = [(float(p), None) for p in pis]
    if include_joins:
        for c0 in join_points(domain):
            p0 = phi_cdf(domain, mu0, sigma0_sq, c0)
            if p0 < 1:
                cells.append((p0, c0))
    cells.sort()
    rows = []
    for alpha in alphas:
        for p, c_fixed in cells:
            C = c_fixed if c_fixed is not None else quantile_C(domain, mu0, sigma0_sq, p)
            spec = UniSpec(domain, mu0, sigma0_sq, float(alpha), C=C)
            vm = asymptotic_var_mu(spec)
            vs = asymptotic_var_sigma_sq(spec)
            rows.append({"alpha": float(alpha), "pi": p, "C": C,
                         "log_var_mu": math.log(vm) if vm > 0 else -INF,
                         "log_var_sigma_sq": math.log(vs) if vs > 0 else -INF})
    return rows


def write_curve_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    cols = ["alpha", "pi", "C", "log_var_mu", "log_var_sigma_sq"]
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(float(r[c])) for c in cols])


def parse_domain(obj) -> IntervalUnion:
    """A named domain ("D1", "D2", "D3", "R") or an interval-union JSON object."""
    if isinstance(obj, str):
        return named_domain(obj)
    return IntervalUnion.from_json(obj)


def curve_from_json(obj) -> dict:
    """Keyword arguments for ``variance_curve`` from a JSON study description.

    Keys: domain, mu0, sigma0_sq, alphas, pis (optional), include_joins.
    """
    known = {"domain", "mu0", "sigma0_sq", "alphas", "pis", "include_joins"}
    extra = set(obj) - known
    if extra:
        raise ValueError(f"unknown univariate fields: {sorted(extra)}")
    if "domain" not in obj:
        raise ValueError("univariate spec needs a domain")
    kw = {"domain": parse_domain(obj["domain"]),
          "mu0": float(obj.get("mu0", 0.0)),
          "sigma0_sq": float(obj.get("sigma0_sq", 1.0)),
          "alphas": tuple(float(a) for a in obj.get("alphas", (0.5, 1.0, 1.5, 2.0))),
          "include_joins": bool(obj.get("include_joins", True))}
    if obj.get("pis") is not None:
        pis = [float(p) for p in obj["pis"]]
        if any(not 0 < p <= 1 for p in pis):
            raise ValueError("pis must lie in (0, 1]")
        kw["pis"] = pis
    UniSpec(kw["domain"], kw["mu0"], kw["sigma0_sq"], 0.0)  # validates
    return kw
