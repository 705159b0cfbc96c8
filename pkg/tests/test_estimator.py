import io
import math
import warnings

import numpy as np
import pytest

from genscore.ab_model import ABModel
from genscore.domain import FullSpace, LqBall, NonNegOrthant
from genscore.errors import SingularMatrixError
from genscore.estimator import (GammaG, HValidityWarning, apply_diag_multiplier, assemble,
                                default_delta, dump_gamma_g, empirical_loss, fit, fit_path,
                                fit_profiled, fit_unpenalized, lambda_max, lambda_path,
                                load_gamma_g, quadratic_loss, write_path_csv)
from genscore.intervals import INF
from genscore.weights import Truncation, WeightSpec

from oracles import kkt_violation, lasso_enumerate, nonneg_gaussian_gamma_g


def _random_gg(m=3, centered=False, seed=0, n=200):
    rng = np.random.default_rng(seed)
    X = rng.exponential(size=(n, m))
    return assemble(1, 1, centered, NonNegOrthant(m), WeightSpec(2.0), X), X


def test_assemble_gaussian_line():
    gg = assemble(1, 1, False, FullSpace(1), WeightSpec(0.0), np.array([[-1.0], [1.0]]))
    assert np.allclose(gg.Gamma[0], np.eye(2))
    assert np.allclose(gg.g[0], [1.0, 0.0])
    K, eta = fit_unpenalized(gg)
    assert np.allclose(K, 1.0) and np.allclose(eta, 0.0)


def test_assemble_centered_halfline():
    for x in (0.3, 1.0, 2.5):
        gg = assemble(1, 1, True, NonNegOrthant(1), WeightSpec(2.0, Truncation.explicit([INF])),
                      np.array([[x]]))
        assert gg.Gamma[0, 0, 0] == pytest.approx(x ** 4)
        assert gg.g[0, 0] == pytest.approx(3 * x ** 2)


def test_boundary_rows_contribute_nothing():
    X = np.array([[0.5, 1.0], [0.0, 2.0]])
    gg = assemble(1, 1, True, NonNegOrthant(2), WeightSpec(2.0), X)
    one = assemble(1, 1, True, NonNegOrthant(2), WeightSpec(2.0), X[:1])
    # row 2 has w_1 = 0; only column 1 is affected, and it halves by the n average
    assert np.allclose(gg.Gamma[0] * 2, one.Gamma[0])
    assert np.allclose(gg.g[0] * 2, one.g[0])


def test_assemble_matches_textbook_formula():
    rng = np.random.default_rng(1)
    X = rng.exponential(size=(300, 4))
    gg = assemble(1, 1, False, NonNegOrthant(4), WeightSpec(2.0), X)
    G, g = nonneg_gaussian_gamma_g(X)
    assert np.allclose(gg.Gamma, G, rtol=1e-12) and np.allclose(gg.g, g, rtol=1e-12)


@pytest.mark.parametrize("a,b,centered", [(1, 1, False), (0.5, 1.5, False), (0, 0, False),
                                          (1.5, 0, False), (0, 1, True), (2, 1, True)])
def test_quadratic_equals_direct_loss(a, b, centered):
    # the quadratic form must reproduce sum_j [0.5 w (d log p)^2 + dw d log p + w d^2 log p]
    rng = np.random.default_rng(2)
    m = 3
    dom = LqBall(m, 2.0, 3.0, nonneg=True)
    X = rng.uniform(0.05, 1.6, size=(400, m))
    X = X[dom.contains_batch(X)]
    w = WeightSpec(1.5, Truncation.quantile(0.7))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HValidityWarning)
        gg = assemble(a, b, centered, dom, w, X)
    A = rng.normal(size=(m, m))
    K = A @ A.T + np.eye(m)
    eta = None if centered else rng.normal(size=m)
    model = ABModel(a, b, K, eta, centered=centered)
    assert quadratic_loss(gg, K, eta) == pytest.approx(empirical_loss(model, dom, w, X), rel=1e-10)


def test_blocks_symmetric_psd():
    gg, _ = _random_gg(4)
    for G in gg.Gamma:
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G)[0] > -1e-12


def test_apply_diag_multiplier():
    G = np.zeros((2, 3, 3))
    G[:, :2, :2] = [[2, 1], [1, 2]]
    G[:, 2, 2] = 5
    gg = GammaG(G, np.zeros((2, 3)), 10, False)
    assert apply_diag_multiplier(gg, 1.0) is gg
    out = apply_diag_multiplier(gg, 1.5)
    assert np.array_equal(out.Gamma[0, :2, :2], [[3, 1], [1, 3]])
    assert out.Gamma[0, 2, 2] == 5 and out.delta == 1.5
    with pytest.raises(ValueError):
        apply_diag_multiplier(gg, 0.9)


def test_default_delta():
    want = 1 + math.sqrt((3 * math.log(478) + math.log(4)) / 1000)
    got = default_delta(1, 0, 500, 478, NonNegOrthant(478))
    assert got == pytest.approx(want, rel=1e-14)
    assert got == pytest.approx(1.14105, abs=1e-5)
    assert default_delta(1, 1, 10 ** 12, 2, FullSpace(2)) == pytest.approx(1.0, abs=1e-3)
    assert default_delta(1, 1, 100, 10, FullSpace(10)) == pytest.approx(2 - 1 / (1 + 80 * math.sqrt(math.log(10) / 100)))
    # bounded coordinates switch a Gaussian-type model to the other bound
    assert default_delta(1, 1, 100, 10, LqBall(10, 2.0, 1.0)) == pytest.approx(
        1 + math.sqrt((3 * math.log(10) + math.log(4)) / 200))
    for n in (1, 10, 1000):
        for m in (1, 5, 100):
            assert default_delta(0, 0, n, m) >= 1 and default_delta(1, 1, n, m) >= 1


def test_scalar_soft_threshold():
    gg = GammaG(np.array([[[1.0, 0.0], [0.0, 2.0]]]), np.array([[0.0, 3.0]]), 1, False)
    res = fit(gg, 1.0, 1.0)
    assert res.eta_hat[0] == pytest.approx(1.0)


def test_lambda_max_zeroes_everything():
    for centered in (True, False):
        gg, _ = _random_gg(4, centered, seed=3)
        for ratio in (1.0, 0.5, "profile"):
            if ratio == "profile" and centered:
                continue
            lm = lambda_max(gg, 1.2, ratio)
            pairs = lambda_path(gg, 1.2, ratio, num_points=3)
            assert pairs[0][0] == pytest.approx(lm)
            r = 0.0 if ratio == "profile" else ratio
            f = fit(gg, lm * (1 + 1e-9), r * lm * (1 + 1e-9), delta=1.2, tol=1e-13)
            off = f.K_hat - np.diag(np.diag(f.K_hat))
            assert np.all(off == 0)
            if not centered and ratio != "profile":
                assert np.all(f.eta_hat == 0)
            f2 = fit(gg, lm * 0.99, r * lm * 0.99, delta=1.2)
            assert f2.n_edges() > 0 or np.any(f2.eta_hat != 0)


def test_lambda_path_shape():
    gg, _ = _random_gg(3)
    pairs = lambda_path(gg, num_points=5, min_ratio=1e-2)
    lams = [p[0] for p in pairs]
    assert lams == sorted(lams, reverse=True)
    assert lams[-1] / lams[0] == pytest.approx(1e-2)
    assert len(lambda_path(gg, num_points=1)) == 1
    with pytest.raises(ValueError):
        lambda_path(gg, min_ratio=1.0)
    # already sparse: diagonal data gives zero off-diagonal gradients
    G = np.zeros((2, 2, 2))
    G[:, 0, 0] = G[:, 1, 1] = 1.0
    sparse = GammaG(G, np.array([[1.0, 0.0], [0.0, 1.0]]), 5, True)
    one = lambda_path(sparse)
    assert len(one) == 1 and 0 < one[0][0] < 1e-10


@pytest.mark.parametrize("centered", [True, False])
def test_fit_matches_enumeration_oracle(centered):
    gg, _ = _random_gg(3, centered, seed=4)
    res = fit(gg, 0.1, 0.05, delta=1.01, tol=1e-12)
    gd = apply_diag_multiplier(gg, 1.01)
    for j in range(3):
        pen = np.full(gg.p, 0.1)
        pen[j] = 0.0
        if not centered:
            pen[3] = 0.05
        ref = lasso_enumerate(gd.Gamma[j], gd.g[j], pen)
        got = res.K_hat[:, j] if centered else np.append(res.K_hat[:, j], res.eta_hat[j])
        assert np.max(np.abs(got - ref)) < 1e-8
        assert kkt_violation(gd.Gamma[j], gd.g[j], pen, got) < 1e-8
    assert res.converged and res.kkt_residual < 1e-8


def test_fit_profiled_equals_eta_unpenalized():
    gg, _ = _random_gg(4, False, seed=5)
    a = fit_profiled(gg, 0.05, delta=1.1, tol=1e-12)
    b = fit(gg, 0.05, 0.0, delta=1.1, tol=1e-12)
    assert np.max(np.abs(a.K_hat - b.K_hat)) < 1e-6
    assert np.max(np.abs(a.eta_hat - b.eta_hat)) < 1e-6
    with pytest.raises(ValueError):
        fit_profiled(_random_gg(3, True)[0], 0.1)


def test_schur_complement_pd():
    gg, _ = _random_gg(2, False, seed=6)
    gd = apply_diag_multiplier(gg, 1.05)
    for j in range(2):
        v = gd.gamma_K_eta(j)
        S = gd.Gamma_K(j) - np.outer(v, v) / gd.gamma_eta(j)
        assert np.linalg.eigvalsh(S)[0] > 0


def test_unpenalized_agrees_with_lambda_zero():
    gg, _ = _random_gg(3, False, seed=7)
    K, eta = fit_unpenalized(gg)
    f = fit(gg, 0.0, 0.0, tol=1e-13, max_iter=100000)
    assert np.max(np.abs(f.K_hat - K)) < 1e-6 and np.max(np.abs(f.eta_hat - eta)) < 1e-6


def test_permutation_equivariance():
    rng = np.random.default_rng(8)
    X = rng.exponential(size=(150, 4))
    perm = np.array([2, 0, 3, 1])
    w = WeightSpec(1.0, Truncation.quantile(0.5))
    K, eta = fit_unpenalized(assemble(1, 1, False, NonNegOrthant(4), w, X))
    Kp, etap = fit_unpenalized(assemble(1, 1, False, NonNegOrthant(4), w, X[:, perm]))
    assert np.allclose(Kp, K[np.ix_(perm, perm)]) and np.allclose(etap, eta[perm])


def test_scale_equivariance_centered_gaussian():
    # x -> c x on R_+^m with h(x) = x^2: K_hat scales by 1/c^2
    rng = np.random.default_rng(9)
    X = rng.exponential(size=(100, 3))
    w = WeightSpec(2.0, Truncation.none())
    K1, _ = fit_unpenalized(assemble(1, 1, True, NonNegOrthant(3), w, X))
    K2, _ = fit_unpenalized(assemble(1, 1, True, NonNegOrthant(3), w, 3.0 * X))
    assert np.allclose(K2, K1 / 9.0)


def test_singular_block():
    gg = GammaG(np.zeros((1, 1, 1)), np.zeros((1, 1)), 1, True)
    with pytest.raises(SingularMatrixError):
        fit_unpenalized(gg)
    with pytest.raises(SingularMatrixError):
        fit(gg, 0.1)


def test_path_warm_starts_and_edges():
    gg, _ = _random_gg(5, True, seed=10)
    path = fit_path(gg, delta=1.1, num_points=20)
    assert path.converged and len(path.fits) == 20
    counts = path.edge_counts()
    assert counts[0] == 0 and counts[-1] > 0
    f = path.select_by_edges(2)
    assert f.n_edges() >= 2
    S = f.edge_scores
    assert np.allclose(S, S.T) and np.all(np.diag(S) == 0)
    buf = io.StringIO()
    write_path_csv(path, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "lambda_index,lambda_K,lambda_eta,i,j,kappa"
    assert len(lines) == 1 + 20 * 25


def test_gamma_g_round_trip():
    for centered in (True, False):
        gg, _ = _random_gg(3, centered)
        buf = io.BytesIO()
        dump_gamma_g(gg, buf)
        buf.seek(0)
        again = load_gamma_g(buf)
        assert np.array_equal(again.Gamma, gg.Gamma) and np.array_equal(again.g, gg.g)
        assert again.n == gg.n and again.centered == centered
