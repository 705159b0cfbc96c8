"""Standard normal primitives usable inside compiled kernels.

Everything here is written in the numba subset: scalar math only, no scipy.
Tail probabilities are handled through the upper-tail function so that
masses far out in either tail keep their relative precision.
"""

import math

import numpy as np

from ._accel import njit

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# above this z the erfc route loses the whole mantissa to subnormals
_ASYMPTOTIC_Z = 35.0


@njit
def norm_sf(z):
    return 0.5 * math.erfc(z / _SQRT2)


@njit
def norm_cdf(z):
    return 0.5 * math.erfc(-z / _SQRT2)


@njit
def log_norm_sf(z):
    if z < _ASYMPTOTIC_Z:
        return math.log(0.5 * math.erfc(z / _SQRT2))
    if z == math.inf:
        return -math.inf
    z2 = 1.0 / (z * z)
    series = 1.0 - z2 * (1.0 - z2 * (3.0 - z2 * (15.0 - 105.0 * z2)))
    return -0.5 * z * z - math.log(z) - _LOG_SQRT_2PI + math.log(series)


@njit
def norm_ppf(p):
    """Inverse of the standard normal cdf for ``0 < p < 1``.

    Acklam's rational approximation followed by one Halley step, which brings
    the relative error to roughly machine precision.
    """
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / \
            (((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
                - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
              - 1.328068155288572e+01) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                 - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
               + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    if x < 0.0:
        e = norm_cdf(x) - p
    else:
        # refine against the upper tail for x > 0
        e = (1.0 - p) - norm_sf(x)
    u = e * _SQRT_2PI * math.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x


@njit
def log_interval_mass(zl, zu):
    """log(Phi(zu) - Phi(zl)) for standardized endpoints, tail-safe."""
    if not zu > zl:
        return -math.inf
    if zl >= 0.0:
        la = log_norm_sf(zl)
        lb = log_norm_sf(zu)
        return la + math.log(-math.expm1(lb - la))
    if zu <= 0.0:
        la = log_norm_sf(-zu)
        lb = log_norm_sf(-zl)
        return la + math.log(-math.expm1(lb - la))
    return math.log1p(-(norm_sf(zu) + norm_sf(-zl)))


@njit
def _upper_tail_inv(a, b, u):
    # inverse-cdf draw from N(0,1) restricted to [a, b] with 0 <= a < b
    if a < _ASYMPTOTIC_Z:
        qa = norm_sf(a)
        qb = norm_sf(b)
        p = qa - u * (qa - qb)
        if p <= 0.0:
            return b
        x = -norm_ppf(p)
    else:
        la = log_norm_sf(a)
        lb = log_norm_sf(b)
        target = la + math.log1p(-u * (-math.expm1(lb - la)))
        x = a + (la - target) / a
        for _ in range(50):
            lq = log_norm_sf(x)
            dlq = -math.exp(-0.5 * x * x - _LOG_SQRT_2PI - lq)
            step = (lq - target) / dlq
            x -= step
            if abs(step) < 1e-15 * x:
                break
    if x < a:
        x = a
    if x > b:
        x = b
    return x


@njit
def std_truncnorm_inv(zl, zu, u):
    """Map ``u`` in [0, 1] to a draw of N(0,1) truncated to [zl, zu]."""
    if zl >= 0.0:
        return _upper_tail_inv(zl, zu, u)
    if zu <= 0.0:
        return -_upper_tail_inv(-zu, -zl, 1.0 - u)
    pl = norm_cdf(zl)
    pu = norm_cdf(zu)
    x = norm_ppf(pl + u * (pu - pl))
    if x < zl:
        x = zl
    if x > zu:
        x = zu
    return x


@njit
def truncnorm_union_draw(lo, hi, k, mu, sd, u1, u2, logm):
    """One draw from N(mu, sd^2) restricted to the union of ``k`` intervals.

    ``logm`` is scratch space of length >= k.  Returns NaN when every
    component has numerically zero mass.
    """
    mx = -math.inf
    for i in range(k):
        lm = log_interval_mass((lo[i] - mu) / sd, (hi[i] - mu) / sd)
        logm[i] = lm
        if lm > mx:
            mx = lm
    if mx == -math.inf:
        return math.nan
    tot = 0.0
    for i in range(k):
        tot += math.exp(logm[i] - mx)
    target = u1 * tot
    acc = 0.0
    pick = -1
    for i in range(k):
        w = math.exp(logm[i] - mx)
        if w > 0.0:
            pick = i
            acc += w
            if target < acc:
                break
    z = std_truncnorm_inv((lo[pick] - mu) / sd, (hi[pick] - mu) / sd, u2)
    return mu + sd * z


@njit
def truncnorm_union_many(lo, hi, mu, sd, u1, u2, out):
    k = lo.shape[0]
    logm = np.empty(k)
    for i in range(out.shape[0]):
        out[i] = truncnorm_union_draw(lo, hi, k, mu, sd, u1[i], u2[i], logm)
    return out


def sample_truncnorm_union(mu, sd, lo, hi, size, rng):
    """Vectorized exact sampler for a normal truncated to an interval union."""
    lo = np.ascontiguousarray(lo, dtype=float)
    hi = np.ascontiguousarray(hi, dtype=float)
    u = rng.random((2, size))
    out = np.empty(size)
    return truncnorm_union_many(lo, hi, float(mu), float(sd), u[0], u[1], out)
