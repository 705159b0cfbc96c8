"""The compiled kernels and their numpy fallbacks must agree."""

import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from genscore import _accel, _kernels
from genscore.ab_model import power


def _inputs(a, b, seed=0, n=300, m=5):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.1, 2.0, size=(n, m))
    W = rng.uniform(0, 1, size=(n, m))
    W[rng.uniform(size=(n, m)) < 0.1] = 0.0
    dW = rng.normal(size=(n, m))
    dW[W == 0] = 0.0
    ca = 1.0 if a == 0 else float(a)
    return X, power(X, a), W, dW, float(a), ca, float(b)


@pytest.mark.parametrize("a,b,centered", [(1, 1, False), (0, 0, False), (0.5, 1.5, True),
                                          (2, 0, False), (1.5, 1, True)])
def test_assemble_backends_agree(a, b, centered):
    X, Xa, W, dW, a, ca, b = _inputs(a, b)
    G1, g1 = _kernels._assemble_loops(X, Xa, W, dW, a, ca, b, centered)
    G2, g2 = _kernels._assemble_numpy(X, Xa, W, dW, a, ca, b, centered)
    assert np.allclose(G1, G2, rtol=1e-12, atol=1e-14)
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-14)


def test_cd_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(5):
        A = rng.normal(size=(8, 8))
        G = A @ A.T / 8 + 0.1 * np.eye(8)
        g = rng.normal(size=8)
        pen = np.full(8, 0.2)
        pen[0] = 0.0
        t1, t2 = np.zeros(8), np.zeros(8)
        r1 = _kernels._cd_loops(G, g, pen, t1, 1e-12, 10000)
        r2 = _kernels._cd_numpy(G, g, pen, t2, 1e-12, 10000)
        assert np.allclose(t1, t2, atol=1e-10)
        assert abs(r1[0] - r2[0]) <= 1


_SCRIPT = textwrap.dedent("""
    import json, sys
    import numpy as np
    from genscore import _accel
    from genscore.ab_model import ABModel
    from genscore.domain import LqBall
    from genscore.estimator import assemble, fit_path
    from genscore.sampler import SamplerConfig, gibbs_sample
    from genscore.weights import Truncation, WeightSpec

    m = 3
    K = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 1.0]])
    dom = LqBall(m, 2.0, 2.0, nonneg=True)
    X = gibbs_sample(ABModel(1, 1, K, centered=True), dom, 200,
                     SamplerConfig(burn_in=50, thin=2, seed=11))
    gg = assemble(1, 1, True, dom, WeightSpec(1.0, Truncation.quantile(0.5)), X)
    path = fit_path(gg, delta=1.1, num_points=10)
    json.dump({"backend": _accel.backend(), "X": X.tolist(),
               "K": [f.K_hat.tolist() for f in path.fits]}, sys.stdout)
""")


def _run(disable):
    env = dict(os.environ)
    env.pop("GENSCORE_DISABLE_NUMBA", None)
    if disable:
        env["GENSCORE_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True,
                         text=True, check=True, timeout=600)
    return json.loads(out.stdout)


@pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba is disabled in this process")
def test_end_to_end_fallback_matches_numba():
    fast, slow = _run(False), _run(True)
    assert fast["backend"] == "numba" and slow["backend"] == "python"
    assert np.allclose(fast["X"], slow["X"], rtol=1e-10, atol=1e-12)
    assert np.allclose(fast["K"], slow["K"], rtol=1e-8, atol=1e-10)



def test_benchmark_script_runs():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--n", "100", "--m", "4", "--repeat", "1"],
                         capture_output=True, text=True, timeout=600)
    assert out.returncode == 0, out.stderr
    assert "fit_path" in out.stdout and "speedup" in out.stdout
