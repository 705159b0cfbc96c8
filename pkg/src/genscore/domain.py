"""Domains in R^m described through their one-dimensional sections.

Every domain here is a component-wise union of intervals: fixing all
coordinates but the j-th leaves a finite union of intervals (the *section*).
The truncated component-wise distance ``phi`` measures how far ``x_j`` is from
the ends of the section component it lies in, capped at ``C_j``.

Scalar entry points (``contains``, ``section``, ``phi``, ``phi_deriv_sign``,
``g0_distance``) work point by point; the ``*_batch`` variants take an
``(n, m)`` data matrix and are vectorized for the closed-form shapes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, RootIsolationError, UnsupportedDomainError
from .intervals import INF, Interval, IntervalUnion

__all__ = [
    "Domain", "FullSpace", "NonNegOrthant", "ProductUnion", "LqBall",
    "LqBallComplement", "PolyConstraint", "Intersection", "UnionOf",
    "contains", "contains_batch", "section", "phi", "phi_deriv_sign",
    "phi_batch", "g0_distance", "g0_batch", "domain_from_json",
    "domain_to_json", "load_domain", "is_unbounded_coordinate",
]


def _as_point(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DomainError(f"expected a point of length {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("point coordinates must be finite")
    return x


def _as_data(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise DomainError(f"expected data with {dim} columns, got shape {X.shape}")
    return X


def _others_sum(A, j):
    # sum over columns except j, without the cancellation of total - A[:, j]
    if A.shape[1] == 1:
        return np.zeros(A.shape[0])
    return np.delete(A, j, axis=1).sum(axis=1)


class Domain:
    """Base class; subclasses fill in ``contains`` and ``section``."""

    dim: int

    def contains(self, x) -> bool:
        raise NotImplementedError

    def section(self, x, j: int) -> IntervalUnion:
        raise NotImplementedError

    def contains_batch(self, X) -> np.ndarray:
        X = _as_data(X, self.dim)
        return np.array([self.contains(row) for row in X], dtype=bool)

    def component_bounds(self, X, j: int):
        """Endpoints of the section component holding ``X[i, j]``, per row.

        Rows whose ``X[i, j]`` is not in its section get NaN for both ends.
        """
        X = _as_data(X, self.dim)
        lo = np.full(X.shape[0], np.nan)
        hi = np.full(X.shape[0], np.nan)
        for i, row in enumerate(X):
            comp = self.section(row, j).component_of(row[j])
            if comp is not None:
                lo[i], hi[i] = comp.lower, comp.upper
        return lo, hi

    def shape_json(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"dim": self.dim, "shape": self.shape_json()}


@dataclass(frozen=True)
class FullSpace(Domain):
    dim: int

    def contains(self, x):
        _as_point(x, self.dim)
        return True

    def contains_batch(self, X):
        X = _as_data(X, self.dim)
        return np.all(np.isfinite(X), axis=1)

    def section(self, x, j):
        return IntervalUnion.real_line()

    def component_bounds(self, X, j):
        n = _as_data(X, self.dim).shape[0]
        return np.full(n, -INF), np.full(n, INF)

    def shape_json(self):
        return {"kind": "full"}


@dataclass(frozen=True)
class NonNegOrthant(Domain):
    dim: int

    def contains(self, x):
        return bool(np.all(_as_point(x, self.dim) >= 0))

    def contains_batch(self, X):
        return np.all(_as_data(X, self.dim) >= 0, axis=1)

    def section(self, x, j):
        x = np.asarray(x, dtype=float)
        if np.any(np.delete(x, j) < 0):
            return IntervalUnion.empty()
        return IntervalUnion([Interval(0.0, INF, True, False)])

    def component_bounds(self, X, j):
        X = _as_data(X, self.dim)
        ok = np.all(X >= 0, axis=1)
        lo = np.where(ok, 0.0, np.nan)
        hi = np.where(ok, INF, np.nan)
        return lo, hi

    def shape_json(self):
        return {"kind": "nonneg"}


@dataclass(frozen=True, eq=False)
class ProductUnion(Domain):
    """Cartesian product of one interval union per coordinate."""

    unions: tuple

    def __init__(self, unions: Sequence[IntervalUnion]):
        object.__setattr__(self, "unions", tuple(unions))
        if any(u.is_empty for u in self.unions):
            raise DomainError("every coordinate of a product domain needs a nonempty set")

    @property
    def dim(self):
        return len(self.unions)

    def __eq__(self, other):
        return isinstance(other, ProductUnion) and self.unions == other.unions

    def __hash__(self):
        return hash(tuple(u.parts for u in self.unions))

    def contains(self, x):
        x = _as_point(x, self.dim)
        return all(u.contains(v) for u, v in zip(self.unions, x))

    def contains_batch(self, X):
        X = _as_data(X, self.dim)
        ok = np.ones(X.shape[0], dtype=bool)
        for j, u in enumerate(self.unions):
            ok &= _union_member(u, X[:, j])
        return ok

    def section(self, x, j):
        x = np.asarray(x, dtype=float)
        for k, u in enumerate(self.unions):
            if k != j and not u.contains(x[k]):
                return IntervalUnion.empty()
        return self.unions[j]

    def component_bounds(self, X, j):
        X = _as_data(X, self.dim)
        others = np.ones(X.shape[0], dtype=bool)
        for k, u in enumerate(self.unions):
            if k != j:
                others &= _union_member(u, X[:, k])
        lo, hi = _locate(self.unions[j], X[:, j])
        lo[~others] = np.nan
        hi[~others] = np.nan
        return lo, hi

    def shape_json(self):
        return {"kind": "product", "intervals": [u.to_json() for u in self.unions]}


def _union_member(u: IntervalUnion, v):
    ok = np.zeros(v.shape[0], dtype=bool)
    for iv in u.parts:
        lo_ok = (v > iv.lower) | ((v == iv.lower) & iv.lower_closed)
        hi_ok = (v < iv.upper) | ((v == iv.upper) & iv.upper_closed)
        ok |= lo_ok & hi_ok
    return ok


def _locate(u: IntervalUnion, v):
    lo = np.full(v.shape[0], np.nan)
    hi = np.full(v.shape[0], np.nan)
    for iv in u.parts:
        inside = ((v > iv.lower) | ((v == iv.lower) & iv.lower_closed)) & \
                 ((v < iv.upper) | ((v == iv.upper) & iv.upper_closed))
        lo[inside] = iv.lower
        hi[inside] = iv.upper
    return lo, hi


def _check_lq(q, r):
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")


@dataclass(frozen=True)
class LqBall(Domain):
    """``{x : ||x||_q <= r}``, optionally restricted to the nonnegative orthant."""

    dim: int
    q: float = 2.0
    r: float = 1.0
    nonneg: bool = False

    def __post_init__(self):
        _check_lq(self.q, self.r)

    def contains(self, x):
        x = _as_point(x, self.dim)
        if self.nonneg and np.any(x < 0):
            return False
        return float(np.sum(np.abs(x) ** self.q)) <= self.r ** self.q

    def contains_batch(self, X):
        X = _as_data(X, self.dim)
        ok = np.sum(np.abs(X) ** self.q, axis=1) <= self.r ** self.q
        if self.nonneg:
            ok &= np.all(X >= 0, axis=1)
        return ok

    def section(self, x, j):
        x = np.asarray(x, dtype=float)
        rest = np.delete(x, j)
        if self.nonneg and np.any(rest < 0):
            return IntervalUnion.empty()
        R = self.r ** self.q - float(np.sum(np.abs(rest) ** self.q))
        if R < 0:
            return IntervalUnion.empty()
        rad = R ** (1.0 / self.q)
        return IntervalUnion([Interval(0.0 if self.nonneg else -rad, rad)])

    def component_bounds(self, X, j):
        X = _as_data(X, self.dim)
        R = self.r ** self.q - _others_sum(np.abs(X) ** self.q, j)
        rad = np.sqrt(R) if self.q == 2 else np.where(R >= 0, np.abs(R) ** (1.0 / self.q), np.nan)
        lo = np.zeros_like(rad) if self.nonneg else -rad
        hi = rad.copy()
        bad = (R < 0) | (X[:, j] < lo) | (X[:, j] > hi)
        if self.nonneg:
            bad |= np.any(X < 0, axis=1)
        lo = np.where(bad, np.nan, lo)
        hi = np.where(bad, np.nan, hi)
        return lo, hi

    def shape_json(self):
        return {"kind": "lq_ball", "q": self.q, "r": self.r, "nonneg": self.nonneg}


@dataclass(frozen=True)
class LqBallComplement(Domain):
    """``{x : ||x||_q > r}``, optionally restricted to the nonnegative orthant."""

    dim: int
    q: float = 2.0
    r: float = 1.0
    nonneg: bool = False

    def __post_init__(self):
        _check_lq(self.q, self.r)

    def contains(self, x):
        x = _as_point(x, self.dim)
        if self.nonneg and np.any(x < 0):
            return False
        return float(np.sum(np.abs(x) ** self.q)) > self.r ** self.q

    def contains_batch(self, X):
        X = _as_data(X, self.dim)
        ok = np.sum(np.abs(X) ** self.q, axis=1) > self.r ** self.q
        if self.nonneg:
            ok &= np.all(X >= 0, axis=1)
        return ok

    def section(self, x, j):
        x = np.asarray(x, dtype=float)
        rest = np.delete(x, j)
        if self.nonneg and np.any(rest < 0):
            return IntervalUnion.empty()
        R = self.r ** self.q - float(np.sum(np.abs(rest) ** self.q))
        if R < 0:
            if self.nonneg:
                return IntervalUnion([Interval(0.0, INF, True, False)])
            return IntervalUnion.real_line()
        rad = R ** (1.0 / self.q)
        right = Interval(rad, INF, False, False)
        if self.nonneg:
            return IntervalUnion([right])
        return IntervalUnion([Interval(-INF, -rad, False, False), right])

    def component_bounds(self, X, j):
        X = _as_data(X, self.dim)
        n = X.shape[0]
        R = self.r ** self.q - _others_sum(np.abs(X) ** self.q, j)
        rad = np.abs(R) ** (1.0 / self.q)
        xj = X[:, j]
        free = R < 0
        lo = np.where(xj > 0, rad, -INF)
        hi = np.where(xj > 0, INF, -rad)
        lo = np.where(free, 0.0 if self.nonneg else -INF, lo)
        hi = np.where(free, INF, hi)
        bad = ~free & (np.abs(xj) <= rad)
        if self.nonneg:
            bad |= np.any(X < 0, axis=1) | (~free & (xj <= 0))
        lo = np.where(bad, np.nan, lo)
        hi = np.where(bad, np.nan, hi)
        assert lo.shape == (n,)
        return lo, hi

    def shape_json(self):
        return {"kind": "lq_ball_complement", "q": self.q, "r": self.r, "nonneg": self.nonneg}


_OPS = {
    "<=": (np.less_equal, True),
    ">=": (np.greater_equal, True),
    "<": (np.less, False),
    ">": (np.greater, False),
}


@dataclass(frozen=True, eq=False)
class PolyConstraint(Domain):
    """``{x : f(x) <op> threshold}`` for a polynomial ``f``.

    ``terms`` is a sequence of ``(coefficient, exponents)`` with one
    nonnegative integer exponent per coordinate.
    """

    dim: int
    terms: tuple
    op: str = "<="
    threshold: float = 0.0

    def __init__(self, dim, terms, op="<=", threshold=0.0):
        clean = []
        for coef, exps in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != dim or any(e < 0 for e in exps):
                raise DomainError(f"bad exponent vector {exps} for dim {dim}")
            clean.append((float(coef), exps))
        if op not in _OPS:
            raise DomainError(f"unknown comparison {op!r}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "terms", tuple(clean))
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "threshold", float(threshold))

    def __eq__(self, other):
        return isinstance(other, PolyConstraint) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash((self.dim, self.terms, self.op, self.threshold))

    def evaluate(self, X):
        X = _as_data(X, self.dim)
        total = np.zeros(X.shape[0])
        for coef, exps in self.terms:
            total += coef * np.prod(X ** np.array(exps, dtype=float), axis=1)
        return total

    def contains(self, x):
        x = _as_point(x, self.dim)
        return bool(_OPS[self.op][0](self.evaluate(x)[0], self.threshold))

    def contains_batch(self, X):
        return _OPS[self.op][0](self.evaluate(X), self.threshold)

    def restriction(self, x, j):
        """Coefficients (highest degree first) of ``y -> f(y; x_{-j}) - threshold``."""
        x = np.asarray(x, dtype=float)
        deg = max((e[j] for _, e in self.terms), default=0)
        coeffs = np.zeros(deg + 1)
        for coef, exps in self.terms:
            c = coef
            for k, e in enumerate(exps):
                if k != j and e:
                    c *= x[k] ** e
            coeffs[deg - exps[j]] += c
        coeffs[deg] -= self.threshold
        return coeffs

    def section(self, x, j):
        coeffs = self.restriction(x, j)
        if not np.all(np.isfinite(coeffs)):
            raise RootIsolationError("non-finite polynomial coefficients in section")
        cmp, closed = _OPS[self.op]
        nz = np.flatnonzero(coeffs)
        if nz.size == 0 or nz[0] == coeffs.size - 1:
            # constant in y
            const = coeffs[-1] if nz.size else 0.0
            return IntervalUnion.real_line() if cmp(const, 0.0) else IntervalUnion.empty()
        coeffs = coeffs[nz[0]:]
        roots = _real_roots(coeffs)
        return _sign_regions(coeffs, roots, lambda v: bool(cmp(v, 0.0)), closed)

    def shape_json(self):
        return {"kind": "poly", "terms": [[c, list(e)] for c, e in self.terms],
                "op": self.op, "threshold": self.threshold}


def _real_roots(coeffs):
    try:
        roots = np.roots(coeffs)
    except np.linalg.LinAlgError as exc:
        raise RootIsolationError(f"companion eigenvalues failed: {exc}") from exc
    scale = np.max(np.abs(coeffs)) / abs(coeffs[0])
    real = []
    for z in roots:
        if abs(z.imag) <= 1e-8 * max(1.0, abs(z.real), scale ** 0.5):
            real.append(z.real)
    if not real:
        return []
    deriv = np.polyder(coeffs)
    polished = []
    for y in real:
        for _ in range(3):
            d = np.polyval(deriv, y)
            if d == 0:
                break
            step = np.polyval(coeffs, y) / d
            if not np.isfinite(step) or abs(step) > 1e-6 * max(1.0, abs(y)):
                break
            y -= step
        polished.append(y)
    polished.sort()
    out = []
    for y in polished:
        if not out or abs(y - out[-1]) > 1e-12 * max(1.0, abs(y)):
            out.append(y)
    return out


def _sign_regions(coeffs, roots, ok, closed):
    """Intervals where ``ok(p(y))`` holds, split only at sign-changing roots."""
    if not roots:
        mid = 0.0
        return IntervalUnion.real_line() if ok(np.polyval(coeffs, mid)) else IntervalUnion.empty()
    probes = [roots[0] - 1.0 - abs(roots[0])]
    probes += [(a + b) / 2 for a, b in zip(roots[:-1], roots[1:])]
    probes.append(roots[-1] + 1.0 + abs(roots[-1]))
    sat = [ok(np.polyval(coeffs, p)) for p in probes]
    bounds = [-INF] + list(roots) + [INF]
    parts = []
    k = 0
    while k < len(sat):
        if not sat[k]:
            k += 1
            continue
        start = k
        # even-multiplicity roots leave the sign unchanged; merge across them
        while k + 1 < len(sat) and sat[k + 1]:
            k += 1
        lo, hi = bounds[start], bounds[k + 1]
        parts.append(Interval(lo, hi, closed and math.isfinite(lo), closed and math.isfinite(hi)))
        k += 1
    return IntervalUnion(parts)


@dataclass(frozen=True, eq=False)
class Intersection(Domain):
    children: tuple

    def __init__(self, children: Sequence[Domain]):
        children = tuple(children)
        if not children:
            raise DomainError("intersection needs at least one child")
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise DomainError(f"children disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "children", children)

    @property
    def dim(self):
        return self.children[0].dim

    def __eq__(self, other):
        return isinstance(other, Intersection) and self.children == other.children

    def __hash__(self):
        return hash(("and",) + self.children)

    def contains(self, x):
        return all(c.contains(x) for c in self.children)

    def contains_batch(self, X):
        ok = self.children[0].contains_batch(X)
        for c in self.children[1:]:
            ok &= c.contains_batch(X)
        return ok

    def section(self, x, j):
        out = self.children[0].section(x, j)
        for c in self.children[1:]:
            if out.is_empty:
                break
            out = out.intersect(c.section(x, j))
        return out

    def component_bounds(self, X, j):
        # the component of an intersection holding x is the intersection of
        # the child components holding x
        lo, hi = self.children[0].component_bounds(X, j)
        for c in self.children[1:]:
            clo, chi = c.component_bounds(X, j)
            # np.maximum propagates NaN, so a row outside any child stays NaN
            lo = np.maximum(lo, clo)
            hi = np.minimum(hi, chi)
        return lo, hi

    def shape_json(self):
        return {"kind": "intersection", "children": [c.shape_json() for c in self.children]}


@dataclass(frozen=True, eq=False)
class UnionOf(Domain):
    children: tuple

    def __init__(self, children: Sequence[Domain]):
        children = tuple(children)
        if not children:
            raise DomainError("union needs at least one child")
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise DomainError(f"children disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "children", children)

    @property
    def dim(self):
        return self.children[0].dim

    def __eq__(self, other):
        return isinstance(other, UnionOf) and self.children == other.children

    def __hash__(self):
        return hash(("or",) + self.children)

    def contains(self, x):
        return any(c.contains(x) for c in self.children)

    def contains_batch(self, X):
        ok = self.children[0].contains_batch(X)
        for c in self.children[1:]:
            ok |= c.contains_batch(X)
        return ok

    def section(self, x, j):
        out = IntervalUnion.empty()
        for c in self.children:
            out = out.union(c.section(x, j))
        return out

    def shape_json(self):
        return {"kind": "union", "children": [c.shape_json() for c in self.children]}


# ---------------------------------------------------------------------------
# serialization

def _shape_from_json(dim, s):
    kind = s["kind"]
    if kind == "full":
        return FullSpace(dim)
    if kind == "nonneg":
        return NonNegOrthant(dim)
    if kind == "product":
        unions = [IntervalUnion.from_json(u) for u in s["intervals"]]
        if len(unions) == 1 and dim > 1:
            unions = unions * dim
        if len(unions) != dim:
            raise DomainError(f"product domain lists {len(unions)} coordinates, dim is {dim}")
        return ProductUnion(unions)
    if kind == "lq_ball":
        return LqBall(dim, float(s.get("q", 2.0)), float(s["r"]), bool(s.get("nonneg", False)))
    if kind == "lq_ball_complement":
        return LqBallComplement(dim, float(s.get("q", 2.0)), float(s["r"]), bool(s.get("nonneg", False)))
    if kind == "poly":
        return PolyConstraint(dim, [(t[0], t[1]) for t in s["terms"]],
                              s.get("op", "<="), float(s.get("threshold", 0.0)))
    if kind == "intersection":
        return Intersection([_shape_from_json(dim, c) for c in s["children"]])
    if kind == "union":
        return UnionOf([_shape_from_json(dim, c) for c in s["children"]])
    raise DomainError(f"unknown domain kind {kind!r}")


def domain_from_json(obj) -> Domain:
    if isinstance(obj, str):
        obj = json.loads(obj)
    dim = int(obj["dim"])
    if dim < 1:
        raise DomainError("dim must be positive")
    return _shape_from_json(dim, obj["shape"])


def domain_to_json(domain: Domain) -> dict:
    return domain.to_json()


def load_domain(path) -> Domain:
    with open(path) as fh:
        return domain_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# point-wise API

def contains(domain: Domain, x) -> bool:
    return domain.contains(_as_point(x, domain.dim))


def contains_batch(domain: Domain, X) -> np.ndarray:
    return domain.contains_batch(X)


def section(domain: Domain, x, j: int) -> IntervalUnion:
    x = np.asarray(x, dtype=float)
    if x.shape != (domain.dim,):
        raise DomainError(f"expected a point of length {domain.dim}")
    if not 0 <= j < domain.dim:
        raise DomainError(f"coordinate index {j} out of range")
    if not np.all(np.isfinite(np.delete(x, j))):
        raise DomainError("fixed coordinates must be finite")
    return domain.section(x, j)


def _as_truncation(C, dim):
    C = np.broadcast_to(np.asarray(C, dtype=float), (dim,)).copy()
    if np.any(~(C > 0)):
        raise DomainError("truncation points must be strictly positive")
    return C


def _distance_and_sign(lo, hi, xj, C):
    """Vectorized four-case distance and the a.e. derivative sign."""
    dl = xj - lo
    dh = hi - xj
    d = np.minimum(dl, dh)
    val = np.minimum(C, d)
    # truncation wins ties, then the ascending branch
    sign = np.where(C <= d, 0, np.where(dl <= dh, 1, -1))
    return val, sign.astype(np.int8)


def phi(domain: Domain, C, x) -> np.ndarray:
    """Truncated component-wise distance of ``x`` to the boundary of ``domain``.

    A coordinate that sits exactly on a finite endpoint gets distance 0.
    """
    x = _as_point(x, domain.dim)
    C = _as_truncation(C, domain.dim)
    if not domain.contains(x):
        raise DomainError(f"point {x} is not in the domain")
    out = np.empty(domain.dim)
    for j in range(domain.dim):
        comp = domain.section(x, j).component_of(x[j])
        if comp is None:
            raise DomainError(f"coordinate {j} of {x} is outside its own section")
        val, _ = _distance_and_sign(comp.lower, comp.upper, x[j], C[j])
        out[j] = val
    return out


def phi_deriv_sign(domain: Domain, C, x, j: int) -> int:
    x = _as_point(x, domain.dim)
    C = _as_truncation(C, domain.dim)
    if not domain.contains(x):
        raise DomainError(f"point {x} is not in the domain")
    comp = domain.section(x, j).component_of(x[j])
    if comp is None:
        raise DomainError(f"coordinate {j} of {x} is outside its own section")
    _, s = _distance_and_sign(comp.lower, comp.upper, x[j], C[j])
    return int(s)


def phi_batch(domain: Domain, C, X, check=True):
    """``phi`` and its derivative signs for every row of ``X``.

    Returns ``(values, signs)``, both ``(n, m)``.
    """
    X = _as_data(X, domain.dim)
    C = _as_truncation(C, domain.dim)
    if check:
        bad = ~domain.contains_batch(X)
        if np.any(bad):
            rows = np.flatnonzero(bad)
            raise DomainError(f"{rows.size} rows outside the domain (first: row {rows[0]})")
    vals = np.empty(X.shape)
    signs = np.empty(X.shape, dtype=np.int8)
    for j in range(domain.dim):
        lo, hi = domain.component_bounds(X, j)
        if np.any(np.isnan(lo)):
            i = int(np.flatnonzero(np.isnan(lo))[0])
            raise DomainError(f"row {i}: coordinate {j} outside its section")
        vals[:, j], signs[:, j] = _distance_and_sign(lo, hi, X[:, j], C[j])
    return vals, signs


# ---------------------------------------------------------------------------
# g0: l2 distance to the component-wise boundary

def _g0_canonical(domain: Domain):
    """Reduce supported shapes to (kind, params); raise for everything else."""
    if isinstance(domain, (FullSpace, NonNegOrthant, ProductUnion)):
        return domain
    if isinstance(domain, (LqBall, LqBallComplement)):
        if domain.q != 2:
            raise UnsupportedDomainError("g0 is closed-form only for q = 2 balls")
        return domain
    if isinstance(domain, Intersection):
        kids = [c for c in domain.children if not isinstance(c, FullSpace)]
        orth = [c for c in kids if isinstance(c, NonNegOrthant)]
        rest = [c for c in kids if not isinstance(c, NonNegOrthant)]
        if len(rest) == 0:
            return NonNegOrthant(domain.dim)
        if len(rest) == 1:
            inner = _g0_canonical(rest[0])
            if not orth:
                return inner
            if isinstance(inner, (LqBall, LqBallComplement)):
                return type(inner)(inner.dim, inner.q, inner.r, True)
            if isinstance(inner, NonNegOrthant):
                return inner
            if isinstance(inner, ProductUnion):
                half = IntervalUnion([Interval(0.0, INF, True, False)])
                return ProductUnion([u.intersect(half) for u in inner.unions])
            if isinstance(inner, FullSpace):
                return NonNegOrthant(domain.dim)
    raise UnsupportedDomainError(
        f"no closed-form g0 for {type(domain).__name__}; supported: full, nonneg, "
        "product, q=2 ball and complement, optionally intersected with the orthant")


def g0_batch(domain: Domain, C, X, check=True):
    """Truncated l2 distance to the component-wise boundary, and its gradient.

    Returns ``(values (n,), grads (n, m))``.  The gradient is zero wherever
    the truncation ``C`` is active.
    """
    X = _as_data(X, domain.dim)
    C = float(C)
    if not C > 0:
        raise DomainError("g0 truncation must be positive")
    if check:
        bad = ~domain.contains_batch(X)
        if np.any(bad):
            raise DomainError(f"row {int(np.flatnonzero(bad)[0])} is outside the domain")
    shape = _g0_canonical(domain)
    n, m = X.shape
    grad = np.zeros((n, m))
    rows = np.arange(n)
    if isinstance(shape, FullSpace):
        dist = np.full(n, INF)
    elif isinstance(shape, NonNegOrthant):
        k = np.argmin(X, axis=1)
        dist = X[rows, k]
        grad[rows, k] = 1.0
    elif isinstance(shape, ProductUnion):
        per = np.empty((n, m))
        sgn = np.empty((n, m))
        for j in range(m):
            lo, hi = _locate(shape.unions[j], X[:, j])
            dl, dh = X[:, j] - lo, hi - X[:, j]
            per[:, j] = np.minimum(dl, dh)
            sgn[:, j] = np.where(dl <= dh, 1.0, -1.0)
        k = np.argmin(per, axis=1)
        dist = per[rows, k]
        grad[rows, k] = np.where(np.isfinite(dist), sgn[rows, k], 0.0)
    else:
        norm = np.sqrt(np.sum(X * X, axis=1))
        unit = np.divide(X, norm[:, None], out=np.zeros_like(X), where=norm[:, None] > 0)
        if isinstance(shape, LqBall):
            dist = shape.r - norm
            grad = -unit
        else:
            dist = norm - shape.r
            grad = unit.copy()
        if shape.nonneg:
            face = X.copy()
            if isinstance(shape, LqBallComplement):
                # a face x_j = 0 belongs to the boundary only where ||x_{-j}|| > r
                rest = np.sqrt(np.maximum(np.sum(X * X, axis=1)[:, None] - X * X, 0.0))
                face = np.where(rest > shape.r, X, INF)
            k = np.argmin(face, axis=1)
            fd = face[rows, k]
            use = fd < dist
            dist = np.where(use, fd, dist)
            grad[use] = 0.0
            grad[rows[use], k[use]] = 1.0
    trunc = dist >= C
    grad[trunc] = 0.0
    return np.minimum(dist, C), grad


def g0_distance(domain: Domain, C, x) -> float:
    x = _as_point(x, domain.dim)
    if not domain.contains(x):
        raise DomainError(f"point {x} is not in the domain")
    vals, _ = g0_batch(domain, C, x[None, :], check=False)
    return float(vals[0])


def is_unbounded_coordinate(domain: Domain, j: int) -> bool:
    """Whether coordinate ``j`` can be arbitrarily large in magnitude on ``domain``.

    Conservative: shapes we cannot reason about are reported unbounded.
    """
    if isinstance(domain, (FullSpace, NonNegOrthant, LqBallComplement)):
        return True
    if isinstance(domain, LqBall):
        return False
    if isinstance(domain, ProductUnion):
        parts = domain.unions[j].parts
        return parts[0].lower == -INF or parts[-1].upper == INF
    if isinstance(domain, Intersection):
        return all(is_unbounded_coordinate(c, j) for c in domain.children)
    if isinstance(domain, UnionOf):
        return any(is_unbounded_coordinate(c, j) for c in domain.children)
    return True
