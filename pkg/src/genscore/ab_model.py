"""The pairwise interaction power a-b model.

    log p(x) = -(x^a)' K (x^a) / (2a) + eta' x^b / b + const

with the conventions x^0 = log x and 1/0 = 1 for the leading factors.  With
``centered=True`` eta is known to be zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .domain import is_unbounded_coordinate
from .errors import DomainError

__all__ = [
    "ABModel", "Report", "power", "log_density_unnorm", "log_density_grad",
    "log_density_hess_diag", "check_normalizable", "check_h_valid", "load_model",
]


def power(X, e):
    """``X**e`` with ``X**0`` read as ``log X``."""
    X = np.asarray(X, dtype=float)
    if e == 0:
        return np.log(X)
    return X ** e


def _needs_positive(e) -> bool:
    return e == 0 or float(e) != int(e)


@dataclass(frozen=True, eq=False)
class ABModel:
    a: float
    b: float
    K: np.ndarray
    eta: np.ndarray | None = None
    centered: bool = False

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if a < 0 or b < 0:
            raise ValueError("a and b must be nonnegative")
        K = np.array(self.K, dtype=float, ndmin=2)
        if K.shape[0] != K.shape[1]:
            raise ValueError(f"K must be square, got {K.shape}")
        if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max(initial=0))):
            raise ValueError("K must be symmetric")
        m = K.shape[0]
        eta = np.zeros(m) if self.eta is None else np.array(self.eta, dtype=float).reshape(-1)
        if eta.shape != (m,):
            raise ValueError(f"eta must have length {m}")
        if self.centered and np.any(eta != 0):
            raise ValueError("a centered model has eta = 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "centered", bool(self.centered))

    @property
    def dim(self):
        return self.K.shape[0]

    def _check_x(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DomainError(f"expected {self.dim} coordinates, got {X.shape[-1]}")
        if (_needs_positive(self.a) or (not self.centered and _needs_positive(self.b))) \
                and np.any(X <= 0):
            raise DomainError("log or fractional powers need strictly positive coordinates")
        return X

    def to_json(self):
        return {"a": self.a, "b": self.b, "K": self.K.tolist(), "eta": self.eta.tolist(),
                "centered": self.centered}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        K = np.asarray(obj["K"], dtype=float)
        if K.ndim == 1:
            m = int(round(np.sqrt(K.size)))
            K = K.reshape(m, m)
        return cls(obj["a"], obj["b"], K, obj.get("eta"), bool(obj.get("centered", False)))


def load_model(path) -> ABModel:
    with open(path) as fh:
        return ABModel.from_json(json.load(fh))


def log_density_unnorm(model: ABModel, x):
    """Unnormalized log density; ``x`` may be a point or an (n, m) matrix."""
    X = model._check_x(x)
    Xa = power(X, model.a)
    ca = 1.0 if model.a == 0 else model.a
    quad = np.einsum("...i,ij,...j->...", Xa, model.K, Xa)
    out = -quad / (2 * ca)
    if not model.centered:
        cb = 1.0 if model.b == 0 else model.b
        out = out + power(X, model.b) @ model.eta / cb
    return out


def log_density_grad(model: ABModel, x):
    """Gradient of the log density, same shape as ``x``."""
    X = model._check_x(x)
    a, b = model.a, model.b
    KXa = power(X, a) @ model.K
    g = -(X ** (a - 1)) * KXa
    if not model.centered:
        g = g + model.eta * X ** (b - 1)
    return g


def log_density_hess_diag(model: ABModel, x):
    """Diagonal of the Hessian of the log density, d^2/dx_j^2 log p."""
    X = model._check_x(x)
    a, b = model.a, model.b
    KXa = power(X, a) @ model.K
    Kd = np.diag(model.K)
    if a == 0:
        h = X ** -2.0 * (KXa - Kd)
    else:
        h = -(a - 1) * X ** (a - 2) * KXa - a * X ** (2 * a - 2) * Kd
    if not model.centered:
        h = h + model.eta * (b - 1) * X ** (b - 2)
    return h


@dataclass
class Report:
    ok: bool
    condition: str
    detail: str = ""

    def __bool__(self):
        return self.ok


def _min_eig_ok(K):
    ev = np.linalg.eigvalsh(K)
    return ev[0] > 1e-12 * max(abs(ev[-1]), 1e-300), ev[0]


def check_normalizable(model: ABModel, domain=None) -> Report:
    """Simplified sufficient conditions for a finite normalizing constant.

    ``domain`` is consulted only for the a = 0, b > 0 case, which needs
    eta_j <= 0 on coordinates that are unbounded in the domain.
    """
    pd, lam = _min_eig_ok(model.K)
    if not pd:
        return Report(False, "CC0*", f"K is not positive definite (min eigenvalue {lam:.3g})")
    if model.centered:
        return Report(True, "CC0*", "centered model: positive definite K suffices")
    a, b, eta = model.a, model.b, model.eta
    if (2 * a > b > 0) or (a == 0 and b == 0):
        return Report(True, "CC1*")
    if a > 0 and b == 0:
        if np.all(eta > -1):
            return Report(True, "CC2*")
        return Report(False, "CC2*", "need eta_j > -1 for all j")
    if a == 0 and b > 0:
        m = model.dim
        unb = [j for j in range(m)
               if domain is None or is_unbounded_coordinate(domain, j)]
        if all(eta[j] <= 0 for j in unb):
            return Report(True, "CC3*")
        return Report(False, "CC3*", "need eta_j <= 0 on unbounded coordinates")
    return Report(False, "none", f"no simplified condition covers a={a}, b={b}")


def check_h_valid(model: ABModel, weight) -> Report:
    """Exponent conditions on h(y) = y**alpha for the score matching assumptions.

    For a > 0, b = 0 the bound uses the supplied eta as a plug-in.
    """
    alpha = weight.alphas(model.dim)
    a, b = model.a, model.b
    if weight.mode == "g0":
        return Report(True, "g0", "power conditions do not apply to g0 weights")
    if a == 0:
        ok = bool(np.all(alpha >= 0))
        return Report(ok, "a=0", "" if ok else "need alpha_j >= 0")
    if model.centered:
        bound = max(0.0, 1 - a)
        ok = bool(np.all(alpha > bound))
        return Report(ok, "centered", "" if ok else f"need alpha_j > {bound:g}")
    if b > 0:
        bound = max(0.0, 1 - a, 1 - b)
        ok = bool(np.all(alpha > bound))
        return Report(ok, "a>0,b>0", "" if ok else f"need alpha_j > {bound:g}")
    bound = 1 - model.eta
    ok = bool(np.all(alpha > bound))
    return Report(ok, "a>0,b=0", "" if ok else "need alpha_j > 1 - eta_j")
