import io
import math

import numpy as np
import pytest

from genscore.experiments import (EdgeSet, ExperimentConfig, aggregate, auc_from_points,
                                  generate_K0, graph_compare, read_trials_csv, roc_auc,
                                  roc_points, run_sweep, write_aggregate_csv, write_trials_csv)


def _small(**kw):
    base = dict(m=20, n=120, n_K0=1, trials_per_K0=2, alpha_grid=(0.0, 1.0), pi_grid=(0.6,),
                burn_in=100, num_lambdas=12, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_K0_properties():
    for seed in range(5):
        K = generate_K0(40, 0.3, seed)
        assert np.allclose(K, K.T)
        assert np.linalg.eigvalsh(K)[0] == pytest.approx(0.1, abs=1e-8)
        mask = np.kron(np.eye(10), np.ones((4, 4))).astype(bool)
        assert np.all(K[~mask] == 0)
        off = K[mask & ~np.eye(40, dtype=bool)]
        assert np.all((off == 0) | ((off >= 0.5) & (off <= 1.0)))
        assert len(set(np.diag(K))) == 1
    assert np.array_equal(generate_K0(20, 0.5, 7), generate_K0(20, 0.5, 7))
    assert np.allclose(generate_K0(20, 0.0, 1), 0.1 * np.eye(20))
    with pytest.raises(ValueError):
        generate_K0(15, 0.2, 0)


def test_edge_rate_matches_rho():
    K = generate_K0(200, 0.3, 11)
    n_slots = 10 * (20 * 19 // 2)
    assert len(EdgeSet.from_matrix(K - np.diag(np.diag(K)))) / n_slots == pytest.approx(0.3, abs=0.03)


def test_auc_examples():
    assert auc_from_points([(0, 0), (0, 0.5), (0.5, 1), (1, 1)]) == pytest.approx(0.875)
    assert auc_from_points([]) == pytest.approx(0.5)


def _ordered_pair_roc(S_list, truth):
    # brute force over i < j, independent of EdgeSet
    m = truth.shape[0]
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    pos = [p for p in pairs if truth[p]]
    neg = [p for p in pairs if not truth[p]]
    out = []
    for S in S_list:
        hit = lambda p: S[p] != 0 or S[p[::-1]] != 0
        out.append((sum(map(hit, neg)) / len(neg), sum(map(hit, pos)) / len(pos)))
    return out


def test_roc_points_match_brute_force():
    rng = np.random.default_rng(1)
    m = 8
    T = np.triu(rng.uniform(size=(m, m)) < 0.3, 1)
    truth = EdgeSet.from_matrix(T)
    path = [np.where(rng.uniform(size=(m, m)) < q, rng.normal(size=(m, m)), 0.0)
            for q in (0.0, 0.1, 0.3, 0.6, 1.0)]
    for S in path:
        np.fill_diagonal(S, 0.0)
    got = roc_points(path, truth)
    assert np.allclose(got, _ordered_pair_roc(path, T | T.T))


def test_perfect_path_and_rescaling():
    m = 6
    truth = EdgeSet(m, [(0, 1), (2, 3), (4, 5)])
    full = np.ones((m, m)) - np.eye(m)
    exact = np.zeros((m, m))
    for i, j in truth:
        exact[i, j] = exact[j, i] = 1.0
    half = exact.copy()
    half[4, 5] = half[5, 4] = 0.0
    path = [np.zeros((m, m)), half, exact, full]
    assert roc_auc(path, truth) == 1.0
    assert roc_auc([3.0 * S for S in path], truth) == 1.0
    with pytest.raises(ValueError):
        roc_auc(path, EdgeSet(m))


def test_noise_scores_give_chance_auc():
    rng = np.random.default_rng(2)
    m = 10
    truth = EdgeSet(m, [(i, i + 1) for i in range(0, m - 1, 2)])
    aucs = []
    for _ in range(100):
        S = np.abs(rng.normal(size=(m, m)))
        S = np.maximum(S, S.T)
        np.fill_diagonal(S, 0.0)
        qs = np.quantile(S[np.triu_indices(m, 1)], np.linspace(1, 0, 30))
        aucs.append(roc_auc([np.where(S >= q, S, 0.0) for q in qs], truth))
    assert np.mean(aucs) == pytest.approx(0.5, abs=0.05)


def test_graph_compare():
    e = EdgeSet(3, [(0, 1)])
    assert graph_compare(e, e)["hamming"] == 0
    assert graph_compare(EdgeSet(3), EdgeSet(3, [(0, 1), (1, 2)]))["hamming"] == 2
    out = graph_compare(EdgeSet(3, [(0, 1)]), EdgeSet(3, [(0, 2)]))
    assert out == {"hamming": 2, "degree_histograms": [[1, 1, 0], [1, 0, 1]]}
    assert (1, 0) in e and (0, 2) not in e
    with pytest.raises(ValueError):
        EdgeSet(3, [(1, 1)])
    with pytest.raises(ValueError):
        graph_compare(EdgeSet(3), EdgeSet(4))


def test_config_round_trip_and_validation():
    cfg = _small(include_g0=True)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert ("g0" in {s[2] for s in cfg.settings()})
    with pytest.raises(ValueError):
        ExperimentConfig.from_json({"m": 20, "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(m=10)


def test_baseline_only_sweep():
    cfg = _small(alpha_grid=(0.0,), pi_grid=(1.0,), trials_per_K0=1)
    res = run_sweep(cfg)
    assert not res.errors
    agg = res.aggregate()
    assert len(agg) == 1 and agg[0]["ratio_to_alpha0"] == pytest.approx(1.0)
    assert 0.0 <= agg[0]["mean_auc"] <= 1.0


def test_sweep_is_deterministic_across_workers():
    cfg = _small()
    one = run_sweep(cfg, workers=1)
    two = run_sweep(cfg, workers=2)
    assert not one.errors
    b1, b2 = io.StringIO(), io.StringIO()
    write_trials_csv(one.rows, b1)
    write_trials_csv(two.rows, b2)
    assert b1.getvalue() == b2.getvalue()
    # resuming with the first cell done reproduces the second cell only
    seen = []
    rest = run_sweep(cfg, skip=[(0, 0)], on_cell=lambda k, t, rows, errs: seen.append((k, t)))
    assert seen == [(0, 1)]
    assert [r for r in one.rows if r["trial"] == 1] == rest.rows


def test_trials_csv_round_trip_and_aggregate():
    rows = [{"family": "l2-nn", "a": 1.0, "alpha": al, "pi": 0.6, "mode": "componentwise",
             "K0_index": 0, "trial": t, "auc": v}
            for t, (al, v) in enumerate([(0.0, 0.4), (1.0, 0.8), (0.0, 0.6), (1.0, 0.9)])]
    buf = io.StringIO()
    write_trials_csv(rows, buf)
    buf.seek(0)
    back = read_trials_csv(buf)
    assert len(back) == 4 and back[1]["auc"] == pytest.approx(0.8)
    agg = {(r["alpha"], r["mode"]): r for r in aggregate(back)}
    assert agg[(1.0, "componentwise")]["mean_auc"] == pytest.approx(0.85)
    assert agg[(1.0, "componentwise")]["ratio_to_alpha0"] == pytest.approx(0.85 / 0.5)
    out = io.StringIO()
    write_aggregate_csv(aggregate(back), out)
    assert out.getvalue().startswith("family,")


def test_nan_trials_are_skipped_in_means():
    rows = [{"family": "l2-nn", "a": 1.0, "alpha": 0.0, "pi": 0.6, "mode": "componentwise",
             "K0_index": 0, "trial": t, "auc": v} for t, v in enumerate([0.5, math.nan])]
    agg = aggregate(rows)
    assert agg[0]["mean_auc"] == pytest.approx(0.5)


def test_svg_one_file_per_family(tmp_path):
    pytest.importorskip("matplotlib")
    from genscore.experiments import plot_sweep_svg
    rows = [{"family": f, "a": 1.0, "alpha": al, "pi": p, "mode": "componentwise",
             "K0_index": 0, "trial": 0, "auc": 0.5 + 0.1 * al}
            for f in ("l2-nn", "unif") for al in (0.0, 1.0) for p in (0.4, 0.8)]
    out = plot_sweep_svg(aggregate(rows), tmp_path / "fig.svg")
    assert sorted(out) == sorted([str(tmp_path / "fig_l2-nn.svg"), str(tmp_path / "fig_unif.svg")])
    first = open(out[0]).read()
    plot_sweep_svg(aggregate(rows), tmp_path / "fig.svg")
    assert open(out[0]).read() == first
