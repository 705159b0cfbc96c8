"""Hot loops of the estimator: Gamma/g assembly and lasso coordinate descent.

Each kernel has a loop version compiled by numba and a numpy version used
when numba is disabled.  ``assemble_kernel`` and ``cd_column`` dispatch on
``_accel.USE_NUMBA``; both implementations are importable for testing and
benchmarking.
"""

import math

import numpy as np

from . import _accel
from ._accel import njit


@njit
def _assemble_loops(X, Xa, W, dW, a, ca, b, centered):
    n, m = X.shape
    p = m if centered else m + 1
    G = np.zeros((m, p, p))
    g = np.zeros((m, p))
    for j in range(m):
        for i in range(n):
            w = W[i, j]
            dw = dW[i, j]
            if w == 0.0 and dw == 0.0:
                continue
            x = X[i, j]
            s1 = 0.0
            c = 0.0
            if w != 0.0:
                s1 = w * x ** (2.0 * a - 2.0)
                c = (a - 1.0) * w * x ** (a - 2.0)
            if dw != 0.0:
                c += dw * x ** (a - 1.0)
            for k in range(m):
                xk = Xa[i, k]
                t = s1 * xk
                for l in range(k + 1):
                    G[j, k, l] += t * Xa[i, l]
                g[j, k] += c * xk
            g[j, j] += ca * s1
            if not centered:
                ge = 0.0
                if w != 0.0:
                    cross = -w * x ** (a + b - 2.0)
                    for k in range(m):
                        G[j, m, k] += cross * Xa[i, k]
                    G[j, m, m] += w * x ** (2.0 * b - 2.0)
                    ge -= (b - 1.0) * w * x ** (b - 2.0)
                if dw != 0.0:
                    ge -= dw * x ** (b - 1.0)
                g[j, m] += ge
        for k in range(p):
            for l in range(k + 1):
                G[j, k, l] /= n
                G[j, l, k] = G[j, k, l]
            g[j, k] /= n
    return G, g


def _assemble_numpy(X, Xa, W, dW, a, ca, b, centered):
    n, m = X.shape
    p = m if centered else m + 1
    G = np.zeros((m, p, p))
    g = np.zeros((m, p))
    on_w = W != 0
    on_d = dW != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(on_w, W * X ** (2 * a - 2), 0.0)
        c = np.where(on_w, (a - 1) * W * X ** (a - 2), 0.0) + np.where(on_d, dW * X ** (a - 1), 0.0)
        if not centered:
            cross = np.where(on_w, -W * X ** (a + b - 2), 0.0)
            geta = np.where(on_w, W * X ** (2 * b - 2), 0.0)
            ge = -np.where(on_w, (b - 1) * W * X ** (b - 2), 0.0) - np.where(on_d, dW * X ** (b - 1), 0.0)
    for j in range(m):
        G[j, :m, :m] = (Xa * s1[:, j:j + 1]).T @ Xa / n
        g[j, :m] = c[:, j] @ Xa / n
        g[j, j] += ca * s1[:, j].sum() / n
        if not centered:
            v = cross[:, j] @ Xa / n
            G[j, m, :m] = v
            G[j, :m, m] = v
            G[j, m, m] = geta[:, j].sum() / n
            g[j, m] = ge[:, j].sum() / n
    return G, g


def assemble_kernel(X, Xa, W, dW, a, ca, b, centered):
    args = (np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(Xa, dtype=float),
            np.ascontiguousarray(W, dtype=float), np.ascontiguousarray(dW, dtype=float),
            float(a), float(ca), float(b), bool(centered))
    if _accel.USE_NUMBA:
        return _assemble_loops(*args)
    return _assemble_numpy(*args)


@njit
def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@njit
def _cd_loops(G, g, pen, theta, tol, max_iter):
    p = g.shape[0]
    r = np.empty(p)
    for k in range(p):
        s = g[k]
        for l in range(p):
            s -= G[k, l] * theta[l]
        r[k] = s
    it = 0
    maxd = math.inf
    while it < max_iter:
        it += 1
        maxd = 0.0
        for k in range(p):
            gkk = G[k, k]
            if gkk <= 0.0:
                new = 0.0
            else:
                new = _soft(r[k] + gkk * theta[k], pen[k]) / gkk
            d = new - theta[k]
            if d != 0.0:
                for l in range(p):
                    r[l] -= G[l, k] * d
                theta[k] = new
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        if maxd < tol:
            break
    return it, maxd


def _cd_numpy(G, g, pen, theta, tol, max_iter):
    p = g.shape[0]
    r = g - G @ theta
    it = 0
    maxd = math.inf
    diag = np.diag(G).copy()
    while it < max_iter:
        it += 1
        maxd = 0.0
        for k in range(p):
            gkk = diag[k]
            if gkk <= 0.0:
                new = 0.0
            else:
                z = r[k] + gkk * theta[k]
                new = max(abs(z) - pen[k], 0.0) * (1.0 if z > 0 else -1.0) / gkk
            d = new - theta[k]
            if d != 0.0:
                r -= G[:, k] * d
                theta[k] = new
                maxd = max(maxd, abs(d))
        if maxd < tol:
            break
    return it, maxd


def cd_column(G, g, pen, theta, tol, max_iter):
    """Minimize 0.5 t'Gt - g't + sum pen_k |t_k| in place from ``theta``.

    Returns ``(sweeps, last_max_change)``.
    """
    if _accel.USE_NUMBA:
        return _cd_loops(G, g, pen, theta, float(tol), int(max_iter))
    return _cd_numpy(G, g, pen, theta, float(tol), int(max_iter))
