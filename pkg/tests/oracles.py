"""Independent reference implementations used by the tests.

Nothing here calls the section, distance or assembly code under test; the
oracles only use membership tests, brute force, or textbook formulas.
"""

import itertools

import numpy as np
from scipy.spatial import cKDTree


# ---------------------------------------------------------------------------
# distances

def line_scan_phi(domain, C, X, step=1e-3, refine=30):
    """phi by walking the line through each point until membership fails.

    The walk uses a fixed ``step`` up to distance ``C_j`` in each direction,
    then bisects the last in/out pair ``refine`` times.  Only
    ``domain.contains_batch`` is used.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    C = np.broadcast_to(np.asarray(C, dtype=float), (m,))
    out = np.empty((n, m))
    for j in range(m):
        cj = C[j]
        nsteps = int(np.ceil(cj / step)) + 1
        offs = np.arange(1, nsteps + 1) * step
        dists = []
        for sgn in (1.0, -1.0):
            P = np.repeat(X[:, None, :], nsteps, axis=1)
            P[:, :, j] += sgn * offs[None, :]
            inside = domain.contains_batch(P.reshape(-1, m)).reshape(n, nsteps)
            # first offset that leaves the domain
            leave = np.where(~inside.all(axis=1), np.argmin(inside, axis=1), -1)
            d = np.full(n, np.inf)
            rows = np.flatnonzero(leave >= 0)
            k = leave[rows]
            lo = np.where(k == 0, 0.0, offs[np.maximum(k - 1, 0)])
            hi = offs[k]
            for _ in range(refine):
                mid = 0.5 * (lo + hi)
                Y = X[rows].copy()
                Y[:, j] += sgn * mid
                ok = domain.contains_batch(Y)
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            d[rows] = 0.5 * (lo + hi)
            dists.append(d)
        out[:, j] = np.minimum(np.minimum(dists[0], dists[1]), cj)
    return out


def disk_boundary_points(family, r, n_pts, extent=6.0, rng=None):
    """Sampled points of the component-wise boundary of a 2-d disk-type family."""
    rng = np.random.default_rng(rng)
    if family in ("l2", "l2c"):
        t = np.linspace(0.0, 2 * np.pi, n_pts, endpoint=False)
        return r * np.column_stack([np.cos(t), np.sin(t)])
    k = n_pts // 3
    t = np.linspace(0.0, np.pi / 2, n_pts - 2 * k)
    arc = r * np.column_stack([np.cos(t), np.sin(t)])
    if family == "l2-nn":
        s = np.linspace(0.0, r, k)
    else:  # l2c-nn: the axes beyond the circle
        s = np.linspace(r, extent, k)
    z = np.zeros_like(s)
    return np.vstack([arc, np.column_stack([s, z]), np.column_stack([z, s])])


def boundary_distance(points, boundary, C):
    d, _ = cKDTree(boundary).query(points)
    return np.minimum(d, C)


# ---------------------------------------------------------------------------
# estimator oracles

def nonneg_gaussian_gamma_g(X):
    """Gamma and g for a = b = 1 on R_+^m with h(x) = x^2, no truncation.

    Derived from J = E sum_j [0.5 x_j^2 (d_j log p)^2 + d_j(x_j^2 d_j log p)]
    with d_j log p = eta_j - x' kappa_j:
        Gamma_j = E[x_j^2 (x, -1)(x, -1)'],
        g_j     = E[(2 x_j x + x_j^2 e_j, -2 x_j)].
    """
    n, m = X.shape
    Z = np.hstack([X, -np.ones((n, 1))])
    G = np.einsum("ij,ik,il->jkl", X ** 2, Z, Z) / n
    g = np.zeros((m, m + 1))
    for j in range(m):
        g[j, :m] = 2 * (X[:, j:j + 1] * X).mean(axis=0)
        g[j, j] += (X[:, j] ** 2).mean()
        g[j, m] = -2 * X[:, j].mean()
    return G, g


def lasso_enumerate(G, g, pen):
    """Exact minimizer of 0.5 t'Gt - g't + sum pen|t| by sign-pattern enumeration.

    For every assignment of {-1, 0, +1} to the penalized coordinates the
    stationarity equations are linear; the feasible solution (signs match)
    with the smallest objective wins.  G must be positive definite.
    """
    p = len(g)
    pen = np.asarray(pen, dtype=float)
    free = [k for k in range(p) if pen[k] == 0]
    penal = [k for k in range(p) if pen[k] > 0]
    best, best_val = None, np.inf
    for signs in itertools.product((-1, 0, 1), repeat=len(penal)):
        s = np.zeros(p)
        active = list(free)
        for k, sg in zip(penal, signs):
            if sg:
                s[k] = sg
                active.append(k)
        active.sort()
        t = np.zeros(p)
        if active:
            A = np.ix_(active, active)
            t[active] = np.linalg.solve(G[A], g[active] - pen[active] * s[active])
        if any(np.sign(t[k]) != sg for k, sg in zip(penal, signs) if sg):
            continue
        val = 0.5 * t @ G @ t - g @ t + pen @ np.abs(t)
        if val < best_val - 1e-15:
            best, best_val = t, val
    return best


def kkt_violation(G, g, pen, t):
    r = g - G @ t
    v = np.where(t != 0, np.abs(r - pen * np.sign(t)), np.maximum(np.abs(r) - pen, 0))
    return float(v.max())
