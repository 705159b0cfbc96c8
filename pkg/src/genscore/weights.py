"""Power weights ``h_j(y) = y**alpha_j`` composed with the truncated distance.

Two weighting modes are supported.  In ``componentwise`` mode coordinate j is
weighted by ``phi_j(x)**alpha_j``.  In ``g0`` mode every coordinate gets the
same weight, the truncated l2 distance of ``x`` to the component-wise
boundary; ``alpha`` is ignored there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import domain as dom
from .errors import BoundarySingularityError, DomainError

__all__ = [
    "Truncation", "WeightSpec", "nearest_rank_quantile", "resolve_truncation",
    "h_of_phi", "h_of_phi_deriv", "weight_matrices", "load_weights",
]

_KINDS = ("quantile", "explicit", "none")
_MODES = ("componentwise", "g0")


@dataclass(frozen=True)
class Truncation:
    kind: str = "none"
    pi: float | None = None
    C: tuple | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown truncation kind {self.kind!r}")
        if self.kind == "quantile":
            if self.pi is None or not 0 < self.pi <= 1:
                raise ValueError(f"quantile level must be in (0, 1], got {self.pi}")
        if self.kind == "explicit":
            if self.C is None:
                raise ValueError("explicit truncation needs C")
            C = tuple(float(c) for c in np.atleast_1d(np.asarray(self.C, dtype=float)))
            if any(not c > 0 for c in C):
                raise ValueError("truncation points must be strictly positive")
            object.__setattr__(self, "C", C)

    @classmethod
    def quantile(cls, pi):
        return cls("quantile", pi=float(pi))

    @classmethod
    def explicit(cls, C):
        return cls("explicit", C=C)

    @classmethod
    def none(cls):
        return cls("none")

    def to_json(self):
        if self.kind == "quantile":
            return {"kind": "quantile", "pi": self.pi}
        if self.kind == "explicit":
            return {"kind": "explicit", "C": [c if math.isfinite(c) else "inf" for c in self.C]}
        return {"kind": "none"}

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("kind", "none")
        if kind == "quantile":
            return cls.quantile(obj["pi"])
        if kind == "explicit":
            C = obj["C"]
            C = [float(c) for c in (C if isinstance(C, list) else [C])]
            return cls.explicit(C)
        return cls(kind)


@dataclass(frozen=True)
class WeightSpec:
    alpha: tuple | float = 0.0
    truncation: Truncation = field(default_factory=Truncation)
    mode: str = "componentwise"

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.ndim != 1 or np.any(~np.isfinite(a)) or np.any(a < 0):
            raise ValueError("alpha entries must be finite and >= 0")
        object.__setattr__(self, "alpha", float(a[0]) if a.size == 1 else tuple(a.tolist()))
        if self.mode not in _MODES:
            raise ValueError(f"unknown weight mode {self.mode!r}")

    def alphas(self, m: int) -> np.ndarray:
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.size == 1:
            return np.full(m, a[0])
        if a.size != m:
            raise ValueError(f"alpha has {a.size} entries, data has {m} columns")
        return a

    def to_json(self):
        return {"alpha": list(self.alpha) if isinstance(self.alpha, tuple) else self.alpha,
                "truncation": self.truncation.to_json(), "mode": self.mode}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        alpha = obj.get("alpha", 0.0)
        if isinstance(alpha, list):
            alpha = tuple(alpha)
        return cls(alpha, Truncation.from_json(obj.get("truncation", {"kind": "none"})),
                   obj.get("mode", "componentwise"))


def load_weights(path) -> WeightSpec:
    with open(path) as fh:
        return WeightSpec.from_json(json.load(fh))


def nearest_rank_quantile(values, pi: float) -> float:
    """``ceil(pi * k)``-th smallest of the ``k`` finite values; 1 if none are finite."""
    v = np.asarray(values, dtype=float)
    v = np.sort(v[np.isfinite(v)])
    if v.size == 0:
        return 1.0
    k = max(1, math.ceil(pi * v.size - 1e-12))
    return float(v[k - 1])


def resolve_truncation(spec: WeightSpec, domain, data) -> np.ndarray:
    """Per-coordinate truncation points ``C`` (length m).

    In g0 mode the entries are all equal to the scalar truncation point.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError("data must be an n x m matrix")
    m = domain.dim
    t = spec.truncation
    if t.kind == "none":
        return np.full(m, np.inf)
    if t.kind == "explicit":
        C = np.asarray(t.C, dtype=float)
        if spec.mode == "g0":
            if C.size != 1 and not np.all(C == C[0]):
                raise ValueError("g0 mode takes a single truncation point")
            return np.full(m, C[0])
        if C.size == 1:
            return np.full(m, C[0])
        if C.size != m:
            raise ValueError(f"explicit C has {C.size} entries, domain has dim {m}")
        return C
    if X.shape[0] == 0:
        raise ValueError("quantile truncation needs at least one data row")
    if spec.mode == "g0":
        g, _ = dom.g0_batch(domain, np.inf, X)
        c = nearest_rank_quantile(g, t.pi)
        C = np.full(m, c)
    else:
        vals, _ = dom.phi_batch(domain, np.inf, X)
        C = np.array([nearest_rank_quantile(vals[:, j], t.pi) for j in range(m)])
    if np.any(~(C > 0)):
        raise BoundarySingularityError("quantile truncation point is 0: data sit on the boundary")
    return C


def _power_weights(vals, signs, alpha):
    """``vals**alpha`` and its derivative ``alpha * vals**(alpha-1) * sign``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        W = np.where(alpha == 0, 1.0, vals ** alpha)
        dW = np.where((alpha == 0) | (signs == 0), 0.0,
                      alpha * np.where(alpha == 1, 1.0, vals ** (alpha - 1)) * signs)
    if np.any(np.isinf(W)):
        raise DomainError("infinite weight: a coordinate has an unbounded section and C is "
                          "infinite; use alpha = 0 or a finite truncation point")
    sing = (vals == 0) & (alpha > 0) & (alpha < 1) & (signs != 0)
    if np.any(sing):
        raise BoundarySingularityError(
            "data point on the component-wise boundary with alpha in (0, 1): h' is infinite")
    return W, dW


def weight_matrices(spec: WeightSpec, domain, C, X, check=True):
    """Weights ``W[i, j] = h_j(phi_j(x_i))`` and derivatives ``dW = d_j W``.

    Returns two ``(n, m)`` arrays.
    """
    X = np.asarray(X, dtype=float)
    m = domain.dim
    C = np.broadcast_to(np.asarray(C, dtype=float), (m,))
    if spec.mode == "g0":
        g, grad = dom.g0_batch(domain, float(C[0]), X, check=check)
        if np.any(np.isinf(g)):
            raise DomainError("g0 weight is infinite; set a finite truncation point")
        return np.repeat(g[:, None], m, axis=1), grad
    vals, signs = dom.phi_batch(domain, C, X, check=check)
    alpha = spec.alphas(m)[None, :]
    return _power_weights(vals, signs, alpha)


def h_of_phi(spec: WeightSpec, domain, C, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m = domain.dim
    if spec.mode == "g0":
        return np.full(m, dom.g0_distance(domain, float(np.max(np.atleast_1d(C))), x))
    vals = dom.phi(domain, C, x)
    alpha = spec.alphas(m)
    with np.errstate(invalid="ignore"):
        return np.where(alpha == 0, 1.0, vals ** alpha)


def h_of_phi_deriv(spec: WeightSpec, domain, C, x, j: int) -> float:
    _, dW = weight_matrices(spec, domain, C, np.asarray(x, dtype=float)[None, :])
    return float(dW[0, j])
