"""Time the hot kernels with numba and with the pure-Python/numpy fallback.

    python benchmarks/bench_kernels.py [--n 2000] [--m 50] [--repeat 3]

Each backend runs in its own interpreter because the switch
(GENSCORE_DISABLE_NUMBA) is read at import time.  Compile time is excluded:
every kernel is called once before timing.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _time(fn, repeat):
    fn()  # warm-up / jit compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_backend(n, m, repeat):
    import numpy as np

    from genscore import _accel
    from genscore.ab_model import ABModel
    from genscore.domain import LqBall
    from genscore.estimator import assemble, fit_path
    from genscore.sampler import SamplerConfig, gibbs_sample
    from genscore.weights import Truncation, WeightSpec

    rng = np.random.default_rng(0)
    K = np.eye(m) + 0.2 * (np.eye(m, k=1) + np.eye(m, k=-1))
    model = ABModel(1, 1, K, centered=True)
    dom = LqBall(m, 2.0, float(np.sqrt(m)), nonneg=True)
    X = np.abs(rng.normal(size=(n, m))) * 0.5
    X = X[dom.contains_batch(X)]
    w = WeightSpec(1.0, Truncation.quantile(0.6))
    gg = assemble(1, 1, True, dom, w, X)
    small = max(20, n // 20)
    out = {
        "backend": _accel.backend(),
        "assemble": _time(lambda: assemble(1, 1, True, dom, w, X), repeat),
        "fit_path": _time(lambda: fit_path(gg, delta=1.2, num_points=20), repeat),
        "gibbs": _time(lambda: gibbs_sample(model, dom, small, SamplerConfig(burn_in=10, seed=1)),
                       repeat),
    }
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.child:
        json.dump(run_backend(args.n, args.m, args.repeat), sys.stdout)
        return 0
    res = {}
    for disable in ("0", "1"):
        env = dict(os.environ, GENSCORE_DISABLE_NUMBA=disable)
        cmd = [sys.executable, __file__, "--child", "--n", str(args.n), "--m", str(args.m),
               "--repeat", str(args.repeat)]
        r = json.loads(subprocess.run(cmd, env=env, check=True, capture_output=True,
                                      text=True).stdout)
        res[r["backend"]] = r
    print(f"n={args.n} m={args.m} (best of {args.repeat}, seconds)")
    print(f"{'kernel':<10}{'numba':>12}{'python':>12}{'speedup':>10}")
    for k in ("assemble", "fit_path", "gibbs"):
        a, b = res["numba"][k], res["python"][k]
        print(f"{k:<10}{a:>12.4f}{b:>12.4f}{b / a:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
