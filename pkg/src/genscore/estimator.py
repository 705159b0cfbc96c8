"""Regularized generalized score matching for a-b models.

The empirical loss is a quadratic in the parameters that splits over the
columns of K.  For column j the parameter is ``theta_j = (K[:, j], eta_j)``
(just ``K[:, j]`` when centered) and the loss is

    0.5 * theta_j' Gamma_j theta_j - g_j' theta_j
        + lambda_K * sum_{k != j} |K[k, j]| + lambda_eta * |eta_j|.

``assemble`` builds the ``Gamma_j`` and ``g_j``; the fitting routines solve
the lasso problems by cyclic coordinate descent with soft thresholding.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import weights as wts
from ._kernels import assemble_kernel, cd_column
from .ab_model import ABModel, check_h_valid, power
from .domain import FullSpace, is_unbounded_coordinate
from .errors import ConvergenceWarning, DomainError, SingularMatrixError

__all__ = [
    "GammaG", "FitResult", "PathResult", "HValidityWarning", "assemble",
    "apply_diag_multiplier", "default_delta", "lambda_max", "lambda_path",
    "fit", "fit_profiled", "fit_path", "fit_unpenalized", "empirical_loss",
    "quadratic_loss", "write_path_csv", "path_to_json", "dump_gamma_g",
    "load_gamma_g",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


class HValidityWarning(UserWarning):
    """The weight exponents do not satisfy the score matching conditions."""


@dataclass(frozen=True, eq=False)
class GammaG:
    """Per-column blocks: ``Gamma`` is (m, p, p) and ``g`` is (m, p), p = m or m+1."""

    Gamma: np.ndarray
    g: np.ndarray
    n: int
    centered: bool
    delta: float = 1.0

    @property
    def m(self):
        return self.Gamma.shape[0]

    @property
    def p(self):
        return self.Gamma.shape[1]

    def Gamma_K(self, j):
        return self.Gamma[j, :self.m, :self.m]

    def gamma_K_eta(self, j):
        if self.centered:
            raise ValueError("centered blocks have no eta part")
        return self.Gamma[j, :self.m, self.m]

    def gamma_eta(self, j):
        if self.centered:
            raise ValueError("centered blocks have no eta part")
        return self.Gamma[j, self.m, self.m]


def assemble(a, b, centered, domain, weight, data, C=None, check_h=True) -> GammaG:
    """Build Gamma and g from data rows.

    ``C`` defaults to ``resolve_truncation(weight, domain, data)``.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[1] != domain.dim:
        raise DomainError(f"data must be n x {domain.dim}, got {X.shape}")
    n, m = X.shape
    if n == 0:
        raise DomainError("no data rows")
    a, b = float(a), float(b)
    if check_h and not isinstance(domain, FullSpace):
        rep = check_h_valid(ABModel(a, b, np.eye(m), centered=centered), weight)
        if not rep.ok:
            warnings.warn(f"weight exponents violate {rep.condition}: {rep.detail}",
                          HValidityWarning, stacklevel=2)
    needs_pos = a == 0 or a != int(a) or (not centered and (b == 0 or b != int(b)))
    if needs_pos and np.any(X <= 0):
        raise DomainError("log or fractional powers need strictly positive data")
    if C is None:
        C = wts.resolve_truncation(weight, domain, X)
    W, dW = wts.weight_matrices(weight, domain, C, X)
    Xa = power(X, a)
    ca = 1.0 if a == 0 else a
    G, g = assemble_kernel(X, Xa, W, dW, a, ca, b, centered)
    return GammaG(G, g, n, bool(centered))


def apply_diag_multiplier(gg: GammaG, delta: float) -> GammaG:
    """Scale the diagonal of every Gamma_K block by ``delta`` (never gamma_eta)."""
    if not delta >= 1:
        raise ValueError(f"diagonal multiplier must be >= 1, got {delta}")
    if delta == 1:
        return gg
    G = gg.Gamma.copy()
    idx = np.arange(gg.m)
    G[:, idx, idx] *= delta
    return replace(gg, Gamma=G, delta=gg.delta * delta)


def default_delta(a, b, n, m, domain=None, centered=False, tau=3.0) -> float:
    """Upper-bound diagonal multiplier.

    Gaussian-type models (a = b = 1, or centered a = 1, on a domain whose
    coordinates are all unbounded) use ``2 - 1/(1 + 80 sqrt(log m / n))``;
    everything else uses ``1 + sqrt((tau log m + log 4) / (2n))``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    gaussian = a == 1 and (centered or b == 1)
    if gaussian and domain is not None:
        gaussian = all(is_unbounded_coordinate(domain, j) for j in range(m))
    if gaussian:
        return 2.0 - 1.0 / (1.0 + 80.0 * math.sqrt(math.log(m) / n))
    return 1.0 + math.sqrt((tau * math.log(m) + math.log(4.0)) / (2.0 * n))


# ---------------------------------------------------------------------------
# fitting

@dataclass
class FitResult:
    lambda_K: float
    lambda_eta: float
    K_hat: np.ndarray
    eta_hat: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool = True
    delta: float = 1.0
    profiled: bool = False

    @property
    def edge_scores(self) -> np.ndarray:
        A = np.abs(self.K_hat)
        S = np.maximum(A, A.T)
        np.fill_diagonal(S, 0.0)
        return S

    def edges(self, thresh=0.0):
        S = self.edge_scores
        i, j = np.nonzero(np.triu(S > thresh, 1))
        return list(zip(i.tolist(), j.tolist()))

    def n_edges(self):
        return int(np.count_nonzero(np.triu(self.edge_scores, 1)))


def _penalties(m, j, centered, lam_K, lam_eta):
    pen = np.full(m if centered else m + 1, float(lam_K))
    pen[j] = 0.0
    if not centered:
        pen[m] = float(lam_eta)
    return pen


def _kkt(G, g, pen, theta):
    r = g - G @ theta
    res = np.where(theta != 0, np.abs(r - pen * np.sign(theta)), np.maximum(np.abs(r) - pen, 0.0))
    return float(res.max(initial=0.0))


def _check_unpenalized(G, pen):
    bad = (pen == 0) & (np.diag(G) <= 0)
    if np.any(bad):
        raise SingularMatrixError(f"zero curvature on unpenalized coordinate {int(np.flatnonzero(bad)[0])}")


def _solve_columns(blocks, gs, pens, init, tol, max_iter):
    m = len(blocks)
    thetas = []
    its, kkt = 0, 0.0
    ok = True
    for j in range(m):
        G, g, pen = blocks[j], gs[j], pens[j]
        _check_unpenalized(G, pen)
        theta = np.array(init[j], dtype=float) if init is not None else np.zeros(g.shape[0])
        it, maxd = cd_column(G, g, pen, theta, tol, max_iter)
        its = max(its, it)
        ok &= maxd < tol
        kkt = max(kkt, _kkt(G, g, pen, theta))
        thetas.append(theta)
    return thetas, its, kkt, ok


def _pack(gg, thetas):
    m = gg.m
    K = np.empty((m, m))
    eta = np.zeros(m)
    for j, t in enumerate(thetas):
        K[:, j] = t[:m]
        if len(t) > m:
            eta[j] = t[m]
    return K, eta


def _unpack(gg, warm):
    if warm is None:
        return None
    if isinstance(warm, FitResult):
        K, eta = warm.K_hat, warm.eta_hat
    else:
        K, eta = warm
    out = []
    for j in range(gg.m):
        t = K[:, j] if gg.centered else np.append(K[:, j], eta[j])
        out.append(np.asarray(t, dtype=float))
    return out


def fit(gg: GammaG, lambda_K, lambda_eta=None, delta=1.0, warm_start=None,
        tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> FitResult:
    """Penalized fit at one (lambda_K, lambda_eta); lambda_eta defaults to lambda_K."""
    if lambda_K < 0 or (lambda_eta is not None and lambda_eta < 0):
        raise ValueError("penalties must be nonnegative")
    lam_eta = float(lambda_K if lambda_eta is None else lambda_eta)
    if gg.centered:
        lam_eta = 0.0
    gd = apply_diag_multiplier(gg, delta)
    pens = [_penalties(gg.m, j, gg.centered, lambda_K, lam_eta) for j in range(gg.m)]
    thetas, its, kkt, ok = _solve_columns(gd.Gamma, gd.g, pens, _unpack(gg, warm_start), tol, max_iter)
    if not ok:
        warnings.warn(f"coordinate descent hit max_iter={max_iter} at lambda={lambda_K:g}",
                      ConvergenceWarning, stacklevel=2)
    K, eta = _pack(gg, thetas)
    return FitResult(float(lambda_K), lam_eta, K, eta, its, kkt, ok, gd.delta)


def _profile_blocks(gd: GammaG):
    m = gd.m
    Gp = np.empty((m, m, m))
    gp = np.empty((m, m))
    for j in range(m):
        ge = gd.gamma_eta(j)
        if not ge > 0:
            raise SingularMatrixError(f"gamma_eta is zero for column {j}; cannot profile out eta")
        v = gd.gamma_K_eta(j)
        Gp[j] = gd.Gamma_K(j) - np.outer(v, v) / ge
        gp[j] = gd.g[j, :m] - v * gd.g[j, m] / ge
    return Gp, gp


def fit_profiled(gg: GammaG, lambda_K, delta=1.0, warm_start=None,
                 tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> FitResult:
    """Fit with eta unpenalized, eliminated through the Schur complement."""
    if gg.centered:
        raise ValueError("nothing to profile: the model is centered")
    gd = apply_diag_multiplier(gg, delta)
    Gp, gp = _profile_blocks(gd)
    m = gg.m
    init = None
    if warm_start is not None:
        K0 = warm_start.K_hat if isinstance(warm_start, FitResult) else warm_start[0]
        init = [np.asarray(K0[:, j], dtype=float) for j in range(m)]
    pens = [_penalties(m, j, True, lambda_K, 0.0) for j in range(m)]
    thetas, its, kkt, ok = _solve_columns(Gp, gp, pens, init, tol, max_iter)
    if not ok:
        warnings.warn(f"coordinate descent hit max_iter={max_iter} at lambda={lambda_K:g}",
                      ConvergenceWarning, stacklevel=2)
    K = np.column_stack(thetas)
    eta = np.array([(gd.g[j, m] - gd.gamma_K_eta(j) @ K[:, j]) / gd.gamma_eta(j) for j in range(m)])
    return FitResult(float(lambda_K), 0.0, K, eta, its, kkt, ok, gd.delta, profiled=True)


def fit_unpenalized(gg: GammaG, max_cond=1e12):
    """Closed-form minimizer ``Gamma_j^{-1} g_j`` per column; returns (K_hat, eta_hat)."""
    thetas = []
    for j in range(gg.m):
        G = gg.Gamma[j]
        c = np.linalg.cond(G)
        if not c < max_cond:
            raise SingularMatrixError(f"Gamma block {j} is singular (condition number {c:.3g})")
        thetas.append(np.linalg.solve(G, gg.g[j]))
    return _pack(gg, thetas)


def lambda_max(gg: GammaG, delta=1.0, ratio_eta=1.0) -> float:
    """Smallest lambda_K at which every penalized coordinate is zero.

    The unpenalized coordinates (K_jj, and eta when ``ratio_eta`` is 0 or
    "profile") sit at their conditional optimum; the answer is the largest
    KKT violation over the penalized coordinates, with eta's scaled by the
    ratio.
    """
    gd = apply_diag_multiplier(gg, delta)
    m = gg.m
    profile = ratio_eta == "profile" or (not gg.centered and float(ratio_eta) == 0.0)
    best = 0.0
    for j in range(m):
        G, g = gd.Gamma[j], gd.g[j]
        free = [j]
        if not gg.centered and profile:
            free.append(m)
        free = np.array(free)
        sub = G[np.ix_(free, free)]
        if np.any(np.diag(sub) <= 0):
            raise SingularMatrixError(f"degenerate Gamma block {j}: zero weight on all data")
        theta_u = np.linalg.solve(sub, g[free])
        r = g - G[:, free] @ theta_u
        off = np.delete(np.arange(m), j)
        if off.size:
            best = max(best, float(np.abs(r[off]).max()))
        if not gg.centered and not profile:
            best = max(best, abs(float(r[m])) / float(ratio_eta))
    return best


def lambda_path(gg: GammaG, delta=1.0, ratio_eta=1.0, num_points=50, min_ratio=1e-3):
    """Descending, log-spaced grid of ``(lambda_K, lambda_eta)`` pairs."""
    if num_points < 1:
        raise ValueError("num_points must be >= 1")
    if not 0 < min_ratio < 1:
        raise ValueError("min_ratio must be in (0, 1)")
    lmax = lambda_max(gg, delta, ratio_eta)
    if not lmax > 0:
        scale = max(1.0, float(np.abs(gg.g).max(initial=0.0)))
        return [(1e-12 * scale, 0.0 if _eta_free(gg, ratio_eta) else 1e-12 * scale)]
    lams = lmax * np.logspace(0.0, math.log10(min_ratio), num_points)
    return [(float(l), _eta_lambda(gg, ratio_eta, l)) for l in lams]


def _eta_free(gg, ratio_eta):
    return gg.centered or ratio_eta == "profile" or float(ratio_eta) == 0.0


def _eta_lambda(gg, ratio_eta, lam):
    return 0.0 if _eta_free(gg, ratio_eta) else float(ratio_eta) * lam


@dataclass
class PathResult:
    fits: list
    delta: float
    ratio_eta: object = 1.0

    @property
    def lambdas(self):
        return np.array([f.lambda_K for f in self.fits])

    @property
    def converged(self):
        return all(f.converged for f in self.fits)

    def edge_counts(self):
        return [f.n_edges() for f in self.fits]

    def select_by_edges(self, n_edges):
        """First fit, scanning from the largest lambda down, with at least ``n_edges`` edges."""
        for f in self.fits:
            if f.n_edges() >= n_edges:
                return f
        return self.fits[-1]


def fit_path(gg: GammaG, delta=1.0, ratio_eta=1.0, lambdas=None, num_points=50,
             min_ratio=1e-3, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> PathResult:
    """Warm-started fits from the largest lambda to the smallest."""
    if lambdas is None:
        pairs = lambda_path(gg, delta, ratio_eta, num_points, min_ratio)
    else:
        lams = sorted((float(l) for l in np.atleast_1d(lambdas)), reverse=True)
        pairs = [(l, _eta_lambda(gg, ratio_eta, l)) for l in lams]
    profile = ratio_eta == "profile"
    fits = []
    prev = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        for lk, le in pairs:
            if profile and not gg.centered:
                res = fit_profiled(gg, lk, delta, prev, tol, max_iter)
            else:
                res = fit(gg, lk, le, delta, prev, tol, max_iter)
            fits.append(res)
            prev = res
    n_bad = sum(issubclass(w.category, ConvergenceWarning) for w in caught)
    if n_bad:
        warnings.warn(f"{n_bad} of {len(pairs)} path points did not converge",
                      ConvergenceWarning, stacklevel=2)
    return PathResult(fits, gg.delta * delta, ratio_eta)


# ---------------------------------------------------------------------------
# loss evaluation

def quadratic_loss(gg: GammaG, K, eta=None) -> float:
    """``sum_j 0.5 theta_j' Gamma_j theta_j - g_j' theta_j``."""
    K = np.asarray(K, dtype=float)
    total = 0.0
    for j in range(gg.m):
        t = K[:, j] if gg.centered else np.append(K[:, j], 0.0 if eta is None else eta[j])
        total += 0.5 * t @ gg.Gamma[j] @ t - gg.g[j] @ t
    return float(total)


def empirical_loss(model: ABModel, domain, weight, data, C=None) -> float:
    """Sample average of sum_j [0.5 w (d_j log p)^2 + (d_j w)(d_j log p) + w d_jj log p].

    Evaluated directly from the model's derivatives, independently of
    ``assemble``.
    """
    from .ab_model import log_density_grad, log_density_hess_diag

    X = np.asarray(data, dtype=float)
    if C is None:
        C = wts.resolve_truncation(weight, domain, X)
    W, dW = wts.weight_matrices(weight, domain, C, X)
    gr = log_density_grad(model, X)
    hd = log_density_hess_diag(model, X)
    terms = 0.5 * W * gr ** 2 + np.where(dW != 0, dW * gr, 0.0) + np.where(W != 0, W * hd, 0.0)
    return float(terms.sum(axis=1).mean())


# ---------------------------------------------------------------------------
# export

def write_path_csv(path: PathResult, fh):
    """One row per (lambda, i, j) with the estimate K_hat[i, j]."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["lambda_index", "lambda_K", "lambda_eta", "i", "j", "kappa"])
    for t, f in enumerate(path.fits):
        m = f.K_hat.shape[0]
        for i in range(m):
            for j in range(m):
                w.writerow([t, repr(f.lambda_K), repr(f.lambda_eta), i, j, repr(float(f.K_hat[i, j]))])


def path_to_json(path: PathResult) -> dict:
    return {
        "delta": path.delta,
        "ratio_eta": path.ratio_eta,
        "fits": [{
            "lambda_K": f.lambda_K, "lambda_eta": f.lambda_eta,
            "iterations": f.iterations, "kkt_residual": f.kkt_residual,
            "converged": f.converged, "n_edges": f.n_edges(),
            "K_hat": f.K_hat.tolist(), "eta_hat": f.eta_hat.tolist(),
        } for f in path.fits],
    }


_MAGIC = b"GGV1"


def dump_gamma_g(gg: GammaG, fh):
    """Binary dump: 16-byte header (magic, m, n, centered) then Gamma and g, row-major float64."""
    fh.write(_MAGIC + struct.pack("<III", gg.m, gg.n, int(gg.centered)))
    fh.write(np.ascontiguousarray(gg.Gamma, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(gg.g, dtype="<f8").tobytes())


def load_gamma_g(fh) -> GammaG:
    head = fh.read(16)
    if head[:4] != _MAGIC:
        raise ValueError("not a GGV1 file")
    m, n, centered = struct.unpack("<III", head[4:])
    p = m if centered else m + 1
    G = np.frombuffer(fh.read(8 * m * p * p), dtype="<f8").reshape(m, p, p).copy()
    g = np.frombuffer(fh.read(8 * m * p), dtype="<f8").reshape(m, p).copy()
    return GammaG(G, g, n, bool(centered))
