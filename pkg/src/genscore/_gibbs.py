"""Compiled pieces of the Gibbs sampler.

Domains the kernel understands directly are a product of interval unions,
optionally intersected with one q-norm ball (``lq_kind`` 1) or ball
complement (``lq_kind`` 2).  Each univariate conditional consumes exactly two
uniforms: one to pick the section component and one to invert within it.
"""

import math

import numpy as np

from ._accel import njit
from ._normal import truncnorm_union_draw

MODE_GAUSS = 0     # a = 1 with a linear eta term: normal conditionals
MODE_LOGGAUSS = 1  # a = 0 with log eta term: normal in log x
MODE_GRID = 2      # anything else: grid inverse cdf in x
MODE_GRID_LOG = 3  # a = 0 with power eta term: grid inverse cdf in log x

_MAX_DOUBLINGS = 1100


@njit
def _pw(t, e):
    # real power that never goes complex; NaN flags an invalid point
    if e == 0.0:
        return 1.0
    if t < 0.0:
        if e != math.floor(e):
            return math.nan
        v = math.pow(-t, e)
        if int(e) % 2 == 1:
            return -v
        return v
    if t == 0.0:
        if e > 0.0:
            return 0.0
        return math.inf
    return math.pow(t, e)


@njit
def _logf(mode, t, a, b, kjj, s, eta_j, use_eta):
    """Unnormalized log conditional at t (t = log x in the log modes)."""
    if mode == MODE_GRID_LOG:
        v = -0.5 * kjj * t * t - s * t + t
        if use_eta:
            if b == 0.0:
                v += eta_j * t
            else:
                v += eta_j * math.exp(b * t) / b
        return v
    ta = _pw(t, a)
    t2a = _pw(t, 2.0 * a)
    if math.isnan(ta) or math.isnan(t2a):
        return -math.inf
    v = -(kjj * t2a + 2.0 * s * ta) / (2.0 * a)
    if use_eta and eta_j != 0.0:
        if b == 0.0:
            if t <= 0.0:
                return -math.inf
            v += eta_j * math.log(t)
        else:
            tb = _pw(t, b)
            if math.isnan(tb):
                return -math.inf
            v += eta_j * tb / b
    if math.isnan(v):
        return -math.inf
    return v


@njit
def _clip(mode, lo, hi, anchor, base, cutoff, a, b, kjj, s, eta_j, use_eta):
    """Finite [L, U] covering all but ``cutoff`` nats of an unbounded component."""
    if lo > -math.inf and hi < math.inf:
        return lo, hi, True
    if lo > -math.inf:
        a0 = lo
    elif hi < math.inf:
        a0 = hi
    else:
        a0 = anchor
    f0 = _logf(mode, a0, a, b, kjj, s, eta_j, use_eta)
    L = lo
    U = hi
    ok = True
    if hi == math.inf:
        fmax = f0
        fprev = f0
        step = base
        found = False
        t = a0
        for _ in range(_MAX_DOUBLINGS):
            t = a0 + step
            ft = _logf(mode, t, a, b, kjj, s, eta_j, use_eta)
            if ft > fmax:
                fmax = ft
            if ft < fmax - cutoff and ft <= fprev:
                found = True
                break
            fprev = ft
            step *= 2.0
            if not step < math.inf:
                break
        U = t
        ok = ok and found
    if lo == -math.inf:
        fmax = f0
        fprev = f0
        step = base
        found = False
        t = a0
        for _ in range(_MAX_DOUBLINGS):
            t = a0 - step
            ft = _logf(mode, t, a, b, kjj, s, eta_j, use_eta)
            if ft > fmax:
                fmax = ft
            if ft < fmax - cutoff and ft <= fprev:
                found = True
                break
            fprev = ft
            step *= 2.0
            if not step < math.inf:
                break
        L = t
        ok = ok and found
    return L, U, ok


@njit
def grid_draw(mode, lo, hi, k, anchor, base, cutoff, a, b, kjj, s, eta_j, use_eta,
              u1, u2, fgrid, bounds, mass):
    """Grid inverse-cdf draw over ``k`` components; NaN when no mass is found."""
    G = fgrid.shape[1]
    gmax = -math.inf
    for c in range(k):
        L, U, ok = _clip(mode, lo[c], hi[c], anchor, base, cutoff, a, b, kjj, s, eta_j, use_eta)
        if not ok:
            return math.nan
        bounds[c, 0] = L
        bounds[c, 1] = U
        h = (U - L) / (G - 1)
        for i in range(G):
            v = _logf(mode, L + i * h, a, b, kjj, s, eta_j, use_eta)
            fgrid[c, i] = v
            if v > gmax and v < math.inf:
                gmax = v
    if not gmax > -math.inf:
        return math.nan
    tot = 0.0
    for c in range(k):
        h = (bounds[c, 1] - bounds[c, 0]) / (G - 1)
        acc = 0.0
        prev = 0.0
        for i in range(G):
            v = fgrid[c, i]
            e = math.exp(v - gmax) if v < math.inf else 1.0
            fgrid[c, i] = e
            if i > 0:
                acc += 0.5 * h * (prev + e)
            prev = e
        mass[c] = acc
        tot += acc
    if not tot > 0.0:
        return math.nan
    target = u1 * tot
    pick = -1
    acc = 0.0
    for c in range(k):
        if mass[c] > 0.0:
            pick = c
            acc += mass[c]
            if target < acc:
                break
    L = bounds[pick, 0]
    h = (bounds[pick, 1] - L) / (G - 1)
    target = u2 * mass[pick]
    cum = 0.0
    for i in range(1, G):
        cell = 0.5 * h * (fgrid[pick, i - 1] + fgrid[pick, i])
        if cum + cell >= target and cell > 0.0:
            return L + (i - 1) * h + h * (target - cum) / cell
        cum += cell
    # u2 at the very top: last point with positive density
    for i in range(G - 1, -1, -1):
        if fgrid[pick, i] > 0.0:
            return L + i * h
    return math.nan


@njit
def conditional_draw(mode, lo, hi, k, x, j, a, b, K, eta, use_eta, cutoff,
                     u1, u2, slo, shi, logm, fgrid, bounds, mass):
    """Draw x_j from its conditional given the other coordinates of ``x``.

    ``lo``/``hi`` hold the ``k`` section components in x-space.
    """
    m = x.shape[0]
    kjj = K[j, j]
    eta_j = eta[j] if use_eta else 0.0
    if mode == MODE_GAUSS:
        s = 0.0
        for l in range(m):
            if l != j:
                s += K[j, l] * x[l]
        return truncnorm_union_draw(lo, hi, k, (eta_j - s) / kjj, 1.0 / math.sqrt(kjj),
                                    u1, u2, logm)
    if mode == MODE_LOGGAUSS or mode == MODE_GRID_LOG:
        s = 0.0
        for l in range(m):
            if l != j:
                s += K[j, l] * math.log(x[l])
        kk = 0
        for c in range(k):
            if hi[c] > 0.0:
                slo[kk] = math.log(lo[c]) if lo[c] > 0.0 else -math.inf
                shi[kk] = math.log(hi[c])
                kk += 1
        if kk == 0:
            return math.nan
        if mode == MODE_LOGGAUSS:
            y = truncnorm_union_draw(slo, shi, kk, (eta_j + 1.0 - s) / kjj,
                                     1.0 / math.sqrt(kjj), u1, u2, logm)
        else:
            y = grid_draw(mode, slo, shi, kk, math.log(x[j]), 0.25 / math.sqrt(kjj), cutoff,
                          a, b, kjj, s, eta_j, use_eta, u1, u2, fgrid, bounds, mass)
        return math.exp(y)
    s = 0.0
    for l in range(m):
        if l != j:
            s += K[j, l] * _pw(x[l], a)
    return grid_draw(mode, lo, hi, k, x[j], 0.25 / math.sqrt(kjj), cutoff,
                     a, b, kjj, s, eta_j, use_eta, u1, u2, fgrid, bounds, mass)


@njit
def kernel_section(x, j, plo, phi, pcnt, lq_kind, q, r, lq_sum, lo, hi):
    """Section of the product-with-ball domain; returns the component count."""
    k = 0
    if lq_kind == 0:
        for c in range(pcnt[j]):
            lo[k] = plo[j, c]
            hi[k] = phi[j, c]
            k += 1
        return k
    R = math.pow(r, q) - (lq_sum - math.pow(abs(x[j]), q))
    if lq_kind == 1:
        if R < 0.0:
            return 0
        # pull the sphere in by a relative 1e-12 so rounding never leaves the domain
        rad = math.pow(R, 1.0 / q) * (1.0 - 1e-12)
        for c in range(pcnt[j]):
            l = max(plo[j, c], -rad)
            h = min(phi[j, c], rad)
            if l < h:
                lo[k] = l
                hi[k] = h
                k += 1
        return k
    if R < 0.0:
        for c in range(pcnt[j]):
            lo[k] = plo[j, c]
            hi[k] = phi[j, c]
            k += 1
        return k
    rad = math.pow(R, 1.0 / q) * (1.0 + 1e-12) + 1e-300
    for c in range(pcnt[j]):
        l = plo[j, c]
        h = min(phi[j, c], -rad)
        if l < h:
            lo[k] = l
            hi[k] = h
            k += 1
        l = max(plo[j, c], rad)
        h = phi[j, c]
        if l < h:
            lo[k] = l
            hi[k] = h
            k += 1
    return k


@njit
def gibbs_block(x, plo, phi, pcnt, lq_kind, q, r, mode, a, b, K, eta, use_eta,
                grid_points, cutoff, U, keep, out):
    """Run ``U.shape[0]`` sweeps from ``x`` (updated in place).

    ``keep[s] >= 0`` copies the state after sweep s into that row of ``out``.
    Returns -1 on success or the flat index (sweep * m + j) of a failed draw.
    """
    m = x.shape[0]
    kmax = 2 * plo.shape[1] + 2
    lo = np.empty(kmax)
    hi = np.empty(kmax)
    slo = np.empty(kmax)
    shi = np.empty(kmax)
    logm = np.empty(kmax)
    mass = np.empty(kmax)
    bounds = np.empty((kmax, 2))
    gp = grid_points if (mode == MODE_GRID or mode == MODE_GRID_LOG) else 2
    fgrid = np.empty((kmax, gp))
    for sw in range(U.shape[0]):
        lq_sum = 0.0
        if lq_kind != 0:
            for l in range(m):
                lq_sum += math.pow(abs(x[l]), q)
        for j in range(m):
            k = kernel_section(x, j, plo, phi, pcnt, lq_kind, q, r, lq_sum, lo, hi)
            if k == 0:
                return sw * m + j
            v = conditional_draw(mode, lo, hi, k, x, j, a, b, K, eta, use_eta, cutoff,
                                 U[sw, j, 0], U[sw, j, 1], slo, shi, logm, fgrid, bounds, mass)
            if math.isnan(v):
                return sw * m + j
            if lq_kind != 0:
                lq_sum += math.pow(abs(v), q) - math.pow(abs(x[j]), q)
            x[j] = v
        if keep[sw] >= 0:
            for l in range(m):
                out[keep[sw], l] = x[l]
    return -1
