import math

import numpy as np
import pytest
from scipy import integrate, stats

from genscore.ab_model import ABModel, log_density_unnorm
from genscore.domain import FullSpace, LqBall, ProductUnion
from genscore.errors import SamplerError
from genscore.intervals import INF, Interval, IntervalUnion
from genscore.sampler import (FAMILIES, SamplerConfig, calibrate_c1, config_sidecar,
                              family_domain, gibbs_sample, write_samples_csv)


def _line(*pairs):
    return ProductUnion([IntervalUnion.from_pairs(pairs)])


def _quad_cdf(model, lo, hi):
    """cdf of a 1-d model on [lo, hi] by quadrature of the unnormalized density."""
    f = lambda t: math.exp(float(log_density_unnorm(model, [t])))
    Z = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-10, limit=200)[0]
    return lambda x: np.array([integrate.quad(f, lo, v, epsabs=0, epsrel=1e-10)[0] / Z
                               for v in np.atleast_1d(x)])


def test_reproducible_and_seed_sensitive():
    model = ABModel(1, 1, np.array([[1.0, 0.4], [0.4, 1.0]]), [0.2, 0.0])
    dom = LqBall(2, 2.0, 1.5, True)
    a = gibbs_sample(model, dom, 50, SamplerConfig(burn_in=20, seed=5))
    b = gibbs_sample(model, dom, 50, SamplerConfig(burn_in=20, seed=5))
    c = gibbs_sample(model, dom, 50, SamplerConfig(burn_in=20, seed=6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_empty_request():
    X = gibbs_sample(ABModel(1, 1, np.eye(3)), FullSpace(3), 0)
    assert X.shape == (0, 3)


@pytest.mark.parametrize("family", FAMILIES)
def test_samples_stay_in_family_domain(family):
    m = 4
    K = np.eye(m) + 0.3 * (np.eye(m, k=1) + np.eye(m, k=-1))
    dom = family_domain(family, m, 0.8)
    X = gibbs_sample(ABModel(1, 1, K, centered=True), dom, 300, SamplerConfig(burn_in=50, seed=1))
    assert X.shape == (300, m) and np.all(dom.contains_batch(X))


def test_truncated_normal_mean_on_halfline():
    want = stats.norm.pdf(1.5) / stats.norm.sf(1.5)
    assert want == pytest.approx(1.93868, abs=1e-5)
    X = gibbs_sample(ABModel(1, 1, np.eye(1), [0.0]), _line((1.5, INF)), 100_000,
                     SamplerConfig(burn_in=0, seed=2))
    assert X.mean() == pytest.approx(want, abs=0.01)


def test_two_tail_union_matches_truncnorm():
    # m = 1: each Gibbs step is an exact independent draw
    dom = ProductUnion([IntervalUnion([Interval(-INF, -0.5, False, True), Interval(1.0, INF)])])
    X = gibbs_sample(ABModel(1, 1, np.eye(1) * 2.0, [0.6]), dom, 4000, SamplerConfig(burn_in=0, seed=3))
    mu, sd = 0.3, math.sqrt(0.5)
    left = stats.norm.cdf(-0.5, mu, sd)
    right = stats.norm.sf(1.0, mu, sd)

    def cdf(x):
        x = np.asarray(x)
        lo = stats.norm.cdf(np.minimum(x, -0.5), mu, sd)
        hi = np.where(x > 1.0, stats.norm.cdf(x, mu, sd) - stats.norm.cdf(1.0, mu, sd), 0.0)
        return (lo + hi) / (left + right)

    assert stats.kstest(X[:, 0], cdf).pvalue > 0.01


@pytest.mark.parametrize("a,b,method", [(0, 0, "auto"), (0, 0, "grid"), (0.5, 1.5, "auto"),
                                        (1, 1, "grid"), (2, 0, "auto")])
def test_non_gaussian_conditionals_match_quadrature(a, b, method):
    model = ABModel(a, b, np.array([[1.5]]), [0.4])
    lo, hi = 0.2, 4.0
    # compact support away from 0: normalizable whatever the simplified checks say
    X = gibbs_sample(model, _line((lo, hi)), 3000, SamplerConfig(burn_in=0, seed=4, method=method),
                     check=False)
    assert np.all((X >= lo) & (X <= hi))
    assert stats.kstest(X[:, 0], _quad_cdf(model, lo, hi)).pvalue > 0.01


def test_bivariate_gaussian_moments():
    K = np.array([[1.0, 0.5], [0.5, 1.0]])
    X = gibbs_sample(ABModel(1, 1, K, [0.0, 0.0]), FullSpace(2), 20_000,
                     SamplerConfig(burn_in=100, thin=3, seed=5))
    assert np.allclose(np.cov(X.T), np.linalg.inv(K), atol=0.05)
    assert np.allclose(X.mean(axis=0), 0, atol=0.05)


def test_calibration_median_of_abs_normal():
    c1 = calibrate_c1(ABModel(1, 1, np.eye(1), centered=True), "unif", 20_000,
                      SamplerConfig(burn_in=0, seed=6))
    assert c1 == pytest.approx(stats.norm.ppf(0.75), abs=0.02)
    assert stats.norm.ppf(0.75) == pytest.approx(0.6745, abs=1e-4)


def test_median_property_of_calibrated_radius():
    model = ABModel(1, 1, np.eye(3), centered=True)
    c1 = calibrate_c1(model, "l2", 4000, SamplerConfig(burn_in=0, seed=7))
    # the norm of a standard 3-d normal is chi with 3 degrees of freedom
    assert c1 == pytest.approx(stats.chi.median(3), abs=0.05)


def test_bad_inputs():
    dom = LqBall(2, 2.0, 1.0)
    with pytest.raises(SamplerError):
        gibbs_sample(ABModel(1, 1, np.eye(2)), dom, 5, SamplerConfig(init=[2.0, 0.0]))
    with pytest.raises(SamplerError):
        gibbs_sample(ABModel(1, 1, -np.eye(2), [0.0, 0.0]), FullSpace(2), 5)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    with pytest.raises(ValueError):
        family_domain("banana", 2, 1.0)


def test_explicit_init_is_used():
    X = gibbs_sample(ABModel(1, 1, np.eye(2), [0.0, 0.0]), LqBall(2, 2.0, 1.0), 1,
                     SamplerConfig(burn_in=0, thin=1, seed=8, init=[0.5, 0.5]))
    assert LqBall(2, 2.0, 1.0).contains(X[0])


def test_csv_and_sidecar():
    import io
    import json
    buf = io.StringIO()
    write_samples_csv(np.array([[1.0, 0.1], [2.5, -3.0]]), buf, header=True)
    assert buf.getvalue() == "x1,x2\n1.0,0.1\n2.5,-3.0\n"
    side = json.loads(config_sidecar(ABModel(1, 1, np.eye(2)), FullSpace(2), 10, SamplerConfig()))
    assert side["n"] == 10 and side["sampler"]["burn_in"] == 1000
