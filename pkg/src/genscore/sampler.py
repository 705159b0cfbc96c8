"""Gibbs sampling from a-b models restricted to a domain.

Coordinates are updated one at a time from their exact univariate
conditionals over the section through the current point.  Normal
conditionals (a = 1, and a = 0 after the change of variable y = log x) are
drawn by inverting the truncated normal cdf; other models use a grid
inverse cdf.  Uniforms are drawn in blocks from a numpy Generator, so runs
are reproducible from the seed and identical with or without numba.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _gibbs
from .ab_model import ABModel, check_normalizable
from .domain import (Domain, FullSpace, Intersection, LqBall, LqBallComplement,
                     NonNegOrthant, ProductUnion)
from .errors import DomainError, SamplerError
from .intervals import INF, Interval, IntervalUnion

__all__ = ["SamplerConfig", "gibbs_sample", "calibrate_c1", "family_domain",
           "FAMILIES", "normalize_family", "conditional_mode"]

FAMILIES = ("l2-nn", "l2c-nn", "unif-nn", "l2", "l2c", "unif")
_ALIASES = {"ℓ2-nn": "l2-nn", "ℓ2c-nn": "l2c-nn", "ℓ2": "l2", "ℓ2c": "l2c"}
_BLOCK_UNIFORMS = 1 << 20


@dataclass
class SamplerConfig:
    burn_in: int = 1000
    thin: int | None = None  # None means m sweeps between kept samples
    seed: int = 0
    grid_points: int = 2048
    tail_cutoff_nats: float = 40.0
    init: object = "auto"
    method: str = "auto"  # "auto" or "grid" (forces the grid inverse cdf)

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin is not None and self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.grid_points < 16:
            raise ValueError("grid_points must be >= 16")
        if not self.tail_cutoff_nats > 0:
            raise ValueError("tail_cutoff_nats must be positive")
        if self.method not in ("auto", "grid"):
            raise ValueError(f"unknown sampling method {self.method!r}")

    def to_json(self):
        d = asdict(self)
        if not isinstance(self.init, str):
            d["init"] = np.asarray(self.init, dtype=float).tolist()
        return d


def conditional_mode(model: ABModel, method="auto") -> int:
    eta_free = model.centered or not np.any(model.eta)
    if model.a == 0:
        if method == "auto" and (eta_free or model.b == 0):
            return _gibbs.MODE_LOGGAUSS
        return _gibbs.MODE_GRID_LOG
    if method == "auto" and model.a == 1 and (eta_free or model.b == 1):
        return _gibbs.MODE_GAUSS
    return _gibbs.MODE_GRID


# ---------------------------------------------------------------------------
# domain translation for the kernel

def _product_of(d):
    if isinstance(d, FullSpace):
        return [IntervalUnion.real_line()] * d.dim
    if isinstance(d, NonNegOrthant):
        return [IntervalUnion([Interval(0.0, INF, True, False)])] * d.dim
    if isinstance(d, ProductUnion):
        return list(d.unions)
    return None


def _kernel_domain(domain: Domain):
    """(unions, lq_kind, q, r) when the kernel can handle ``domain``, else None."""
    kids = list(domain.children) if isinstance(domain, Intersection) else [domain]
    m = domain.dim
    unions = [IntervalUnion.real_line()] * m
    lq = None
    for c in kids:
        prod = _product_of(c)
        if prod is not None:
            unions = [u.intersect(v) for u, v in zip(unions, prod)]
            continue
        if isinstance(c, (LqBall, LqBallComplement)) and lq is None:
            lq = c
            if c.nonneg:
                half = IntervalUnion([Interval(0.0, INF, True, False)])
                unions = [u.intersect(half) for u in unions]
            continue
        return None
    if any(u.is_empty for u in unions):
        raise DomainError("domain is empty")
    kind = 0 if lq is None else (1 if isinstance(lq, LqBall) else 2)
    q = 2.0 if lq is None else float(lq.q)
    r = 1.0 if lq is None else float(lq.r)
    return unions, kind, q, r


def _pack_unions(unions):
    P = max(len(u) for u in unions)
    m = len(unions)
    plo = np.zeros((m, P))
    phi = np.zeros((m, P))
    cnt = np.zeros(m, dtype=np.int64)
    for j, u in enumerate(unions):
        lo, hi = u.as_arrays()
        plo[j, :lo.size] = lo
        phi[j, :hi.size] = hi
        cnt[j] = lo.size
    return plo, phi, cnt


# ---------------------------------------------------------------------------
# initialization

def _pick_inside(sec: IntervalUnion, current, positive):
    if positive:
        sec = sec.intersect(IntervalUnion([Interval(0.0, INF, False, False)]))
    if sec.is_empty:
        return None
    if sec.contains(current) and not (positive and current <= 0):
        comp = sec.component_of(current)
        if comp.lower == -INF and comp.upper == INF:
            return current
    best = None
    for iv in sec:
        if math.isfinite(iv.lower) and math.isfinite(iv.upper):
            v = 0.5 * (iv.lower + iv.upper)
        elif math.isfinite(iv.lower):
            v = iv.lower + max(1.0, abs(iv.lower) * 0.1)
        elif math.isfinite(iv.upper):
            v = iv.upper - max(1.0, abs(iv.upper) * 0.1)
        else:
            v = current
        if best is None or abs(v - current) < abs(best - current):
            best = v
    return best


def find_start(domain: Domain, rng, positive=False, attempts=10_000):
    """Coordinate-wise midpoint search for a point inside ``domain``."""
    m = domain.dim
    for t in range(attempts):
        x = np.abs(rng.normal(size=m)) if positive or t == 0 else rng.normal(size=m) * (1 + t % 7)
        if t == 0:
            x = np.full(m, 0.5)
        for _ in range(3):
            for j in range(m):
                v = _pick_inside(domain.section(x, j), x[j], positive)
                if v is not None:
                    x[j] = v
            if domain.contains(x) and (not positive or np.all(x > 0)):
                return x
    raise SamplerError(f"no starting point inside the domain after {attempts} attempts")


# ---------------------------------------------------------------------------
# sampling

def gibbs_sample(model: ABModel, domain: Domain, n: int, cfg: SamplerConfig | None = None,
                 check=True) -> np.ndarray:
    """``n`` rows from the a-b model restricted to ``domain``."""
    cfg = cfg or SamplerConfig()
    m = model.dim
    if domain.dim != m:
        raise DomainError(f"model has dim {m}, domain has dim {domain.dim}")
    if n < 0:
        raise ValueError("n must be >= 0")
    if check:
        rep = check_normalizable(model, domain)
        if not rep.ok:
            raise SamplerError(f"model may not be normalizable ({rep.condition}): {rep.detail}")
    if np.any(np.diag(model.K) <= 0):
        raise SamplerError("K needs a positive diagonal for the conditionals to be proper")
    if n == 0:
        return np.empty((0, m))
    thin = m if cfg.thin is None else int(cfg.thin)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    mode = conditional_mode(model, cfg.method)
    positive = mode in (_gibbs.MODE_LOGGAUSS, _gibbs.MODE_GRID_LOG) or \
        (model.a != int(model.a)) or (not model.centered and model.b != int(model.b)) or \
        (not model.centered and model.b == 0)
    if isinstance(cfg.init, str):
        if cfg.init != "auto":
            raise ValueError(f"unknown init {cfg.init!r}")
        x = find_start(domain, rng, positive)
    else:
        x = np.array(cfg.init, dtype=float)
        if x.shape != (m,) or not domain.contains(x) or (positive and np.any(x <= 0)):
            raise SamplerError("initial point is not inside the domain")
    x = np.ascontiguousarray(x, dtype=float)

    total = cfg.burn_in + n * thin
    keep_all = np.full(total, -1, dtype=np.int64)
    keep_all[cfg.burn_in + thin - 1::thin] = np.arange(n)
    out = np.empty((n, m))
    K = np.ascontiguousarray(model.K)
    eta = np.ascontiguousarray(model.eta)
    use_eta = not model.centered
    kd = _kernel_domain(domain)
    block = max(1, _BLOCK_UNIFORMS // (2 * m))
    for start in range(0, total, block):
        stop = min(total, start + block)
        U = rng.random((stop - start, m, 2))
        keep = keep_all[start:stop]
        if kd is not None:
            unions, kind, q, r = kd
            plo, phi, cnt = _pack_unions(unions)
            status = _gibbs.gibbs_block(x, plo, phi, cnt, kind, q, r, mode, model.a, model.b,
                                        K, eta, use_eta, cfg.grid_points, cfg.tail_cutoff_nats,
                                        U, keep, out)
        else:
            status = _generic_block(domain, x, mode, model, use_eta, cfg, U, keep, out)
        if status >= 0:
            sw, j = divmod(int(status), m)
            raise SamplerError(f"conditional of coordinate {j} has no numerical mass "
                               f"(sweep {start + sw}); the section may be empty or too far in a tail")
    return out


def _generic_block(domain, x, mode, model, use_eta, cfg, U, keep, out):
    # same conditionals, sections from the domain object
    m = x.shape[0]
    G = cfg.grid_points if mode in (_gibbs.MODE_GRID, _gibbs.MODE_GRID_LOG) else 2
    for sw in range(U.shape[0]):
        for j in range(m):
            lo, hi = domain.section(x, j).as_arrays()
            k = lo.size
            if k == 0:
                return sw * m + j
            kmax = k + 1
            v = _gibbs.conditional_draw(mode, lo, hi, k, x, j, model.a, model.b, model.K, model.eta,
                                        use_eta, cfg.tail_cutoff_nats, U[sw, j, 0], U[sw, j, 1],
                                        np.empty(kmax), np.empty(kmax), np.empty(kmax),
                                        np.empty((kmax, G)), np.empty((kmax, 2)), np.empty(kmax))
            if math.isnan(v):
                return sw * m + j
            x[j] = v
        if keep[sw] >= 0:
            out[keep[sw]] = x
    return -1


# ---------------------------------------------------------------------------
# domain families and threshold calibration

def normalize_family(family: str) -> str:
    f = _ALIASES.get(family, family).lower()
    if f not in FAMILIES:
        raise ValueError(f"unknown domain family {family!r}; expected one of {FAMILIES}")
    return f


def family_domain(family: str, m: int, c1: float) -> Domain:
    f = normalize_family(family)
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    if f == "l2-nn":
        return LqBall(m, 2.0, c1, True)
    if f == "l2c-nn":
        return LqBallComplement(m, 2.0, c1, True)
    if f == "l2":
        return LqBall(m, 2.0, c1, False)
    if f == "l2c":
        return LqBallComplement(m, 2.0, c1, False)
    if f == "unif-nn":
        return ProductUnion([IntervalUnion([Interval(c1, INF, True, False)])] * m)
    return ProductUnion([IntervalUnion([Interval(-INF, -c1, False, True),
                                        Interval(c1, INF, True, False)])] * m)


def family_statistic(family: str, X) -> np.ndarray:
    f = normalize_family(family)
    X = np.asarray(X, dtype=float)
    if f in ("l2-nn", "l2c-nn", "l2", "l2c"):
        return np.sqrt(np.sum(X * X, axis=1))
    if f == "unif-nn":
        return X.min(axis=1)
    return np.abs(X).min(axis=1)


def calibrate_c1(model: ABModel, family: str, n: int, cfg: SamplerConfig | None = None) -> float:
    """Median of the family statistic over ``n`` draws from the untruncated model.

    Nonnegative families sample on the orthant, the others on all of R^m.
    """
    f = normalize_family(family)
    if n < 1:
        raise ValueError("n must be >= 1")
    base = NonNegOrthant(model.dim) if f.endswith("-nn") else FullSpace(model.dim)
    X = gibbs_sample(model, base, n, cfg)
    return float(np.median(family_statistic(f, X)))


def write_samples_csv(X, fh, header=False):
    X = np.asarray(X, dtype=float)
    if header:
        fh.write(",".join(f"x{j + 1}" for j in range(X.shape[1])) + "\n")
    for row in X:
        fh.write(",".join(repr(float(v)) for v in row) + "\n")


def config_sidecar(model, domain, n, cfg):
    return json.dumps({"model": model.to_json(), "domain": domain.to_json(), "n": n,
                       "sampler": cfg.to_json()}, indent=2, sort_keys=True)
