"""Support-recovery simulations: K0 generation, sweeps over weight settings, ROC/AUC.

A sweep draws ``n_K0`` block-diagonal precision matrices, and for each one
runs ``trials_per_K0`` independent trials.  A trial calibrates the domain
threshold c1 on a fresh sample, draws the estimation sample from the
truncated model, and fits a lambda path for every weight setting.  The AUC of
each path is recorded.  All randomness comes from ``SeedSequence`` children
keyed by (K0 index, trial), so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ab_model import ABModel, check_normalizable
from .errors import ConvergenceWarning, GenscoreError
from .estimator import HValidityWarning, assemble, default_delta, fit_path
from .sampler import SamplerConfig, calibrate_c1, family_domain, gibbs_sample, normalize_family
from .weights import Truncation, WeightSpec

__all__ = ["ExperimentConfig", "EdgeSet", "generate_K0", "roc_points", "roc_auc",
           "graph_compare", "run_trial", "run_sweep", "SweepResult", "aggregate",
           "write_trials_csv", "write_aggregate_csv", "plot_sweep_svg"]

TRIAL_COLUMNS = ["family", "a", "alpha", "pi", "mode", "K0_index", "trial", "auc"]
AGG_COLUMNS = ["family", "a", "alpha", "pi", "mode", "n_trials", "mean_auc", "sd_auc",
               "ratio_to_alpha0"]


@dataclass
class ExperimentConfig:
    m: int = 20
    n: int = 300
    a: float = 1.0
    b: float = 1.0
    domain_family: str = "l2-nn"
    rho: float = 0.2
    n_K0: int = 5
    trials_per_K0: int = 10
    alpha_grid: tuple = tuple(i / 4 for i in range(9))
    pi_grid: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    include_g0: bool = False
    seed: int = 0
    centered: bool = True
    num_lambdas: int = 50
    min_ratio: float = 1e-3
    burn_in: int = 1000
    thin: int | None = None

    def __post_init__(self):
        self.domain_family = normalize_family(self.domain_family)
        self.alpha_grid = tuple(float(v) for v in self.alpha_grid)
        self.pi_grid = tuple(float(v) for v in self.pi_grid)
        if self.m < 20 or self.m % 10:
            raise ValueError("m must be a multiple of 10 and at least 20 "
                             "(10 diagonal blocks, each able to hold an edge)")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.n_K0 < 1 or self.trials_per_K0 < 1:
            raise ValueError("n_K0 and trials_per_K0 must be >= 1")
        if not self.alpha_grid or any(v < 0 for v in self.alpha_grid):
            raise ValueError("alpha_grid must be a nonempty list of exponents >= 0")
        if not self.pi_grid or any(not 0 < p <= 1 for p in self.pi_grid):
            raise ValueError("pi_grid values must lie in (0, 1]")

    @classmethod
    def paper_scale(cls, **kw):
        """m = 100 with (rho, n) = (0.2, 80); expect many hours of runtime."""
        base = dict(m=100, n=80, rho=0.2, n_K0=5, trials_per_K0=10)
        base.update(kw)
        return cls(**base)

    def to_json(self):
        d = asdict(self)
        d["alpha_grid"] = list(self.alpha_grid)
        d["pi_grid"] = list(self.pi_grid)
        return d

    @classmethod
    def from_json(cls, obj):
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown experiment fields: {sorted(extra)}")
        return cls(**obj)

    def settings(self):
        """Weight settings as (alpha, pi, mode) triples, in output order."""
        out = [(al, pi, "componentwise") for al in self.alpha_grid for pi in self.pi_grid]
        if self.include_g0:
            out += [(1.0, pi, "g0") for pi in self.pi_grid]
        return out


# ---------------------------------------------------------------------------
# graphs

class EdgeSet:
    """Unordered edges (i, j), i != j, on nodes 0..m-1."""

    def __init__(self, m: int, edges=()):
        self.m = int(m)
        s = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) is not an edge")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"edge ({i}, {j}) out of range for m={self.m}")
            s.add((min(i, j), max(i, j)))
        self.edges = frozenset(s)

    @classmethod
    def from_matrix(cls, A, thresh=0.0):
        A = np.asarray(A)
        S = np.maximum(np.abs(A), np.abs(A).T)
        i, j = np.nonzero(np.triu(S > thresh, 1))
        return cls(A.shape[0], zip(i.tolist(), j.tolist()))

    def __len__(self):
        return len(self.edges)

    def __contains__(self, e):
        i, j = e
        return (min(i, j), max(i, j)) in self.edges

    def __iter__(self):
        return iter(sorted(self.edges))

    def __eq__(self, other):
        return isinstance(other, EdgeSet) and self.m == other.m and self.edges == other.edges

    def __repr__(self):
        return f"EdgeSet(m={self.m}, edges={sorted(self.edges)})"

    def degrees(self):
        d = [0] * self.m
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d


def graph_compare(e1: EdgeSet, e2: EdgeSet) -> dict:
    if e1.m != e2.m:
        raise ValueError(f"edge sets have different sizes ({e1.m} vs {e2.m})")
    return {"hamming": len(e1.edges ^ e2.edges),
            "degree_histograms": [e1.degrees(), e2.degrees()]}


def generate_K0(m: int, rho: float, seed) -> np.ndarray:
    """Block-diagonal precision matrix with 10 blocks and minimum eigenvalue 0.1."""
    if m < 10 or m % 10:
        raise ValueError("m must be a positive multiple of 10")
    rng = np.random.default_rng(seed)
    bs = m // 10
    A = np.zeros((m, m))
    for blk in range(10):
        o = blk * bs
        for i in range(1, bs):
            for j in range(i):
                # one uniform per entry decides presence, one gives the value
                on = rng.random() < rho
                v = rng.uniform(0.5, 1.0)
                if on:
                    A[o + i, o + j] = A[o + j, o + i] = v
    lam_min = np.linalg.eigvalsh(A)[0]
    return A + (0.1 - lam_min) * np.eye(m)


# ---------------------------------------------------------------------------
# ROC

def roc_points(score_paths, truth: EdgeSet):
    """(FPR, TPR) for each lambda point, on unordered pairs."""
    m = truth.m
    n_pairs = m * (m - 1) // 2
    n_true = len(truth)
    if n_true == 0 or n_true == n_pairs:
        raise ValueError("ROC is undefined for an empty or complete truth graph")
    pts = []
    for S in score_paths:
        est = EdgeSet.from_matrix(S, 0.0)
        tp = len(est.edges & truth.edges)
        fp = len(est) - tp
        pts.append((fp / (n_pairs - n_true), tp / n_true))
    return pts


def auc_from_points(points) -> float:
    pts = sorted(set(map(tuple, points)) | {(0.0, 0.0), (1.0, 1.0)})
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return float(np.trapezoid(y, x))


def roc_auc(score_paths, truth: EdgeSet) -> float:
    """Area under the TPR-vs-FPR curve traced by a path of edge-score matrices."""
    score_paths = list(score_paths)
    if not score_paths:
        raise ValueError("need at least one lambda point")
    return auc_from_points(roc_points(score_paths, truth))


# ---------------------------------------------------------------------------
# sweeps

def _child_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _K0_for(cfg: ExperimentConfig, k: int):
    """K0 for draw k; redrawn (next sub-key) until it has at least one edge."""
    for attempt in range(1000):
        ss = np.random.SeedSequence(cfg.seed, spawn_key=(0, k, attempt))
        K0 = generate_K0(cfg.m, cfg.rho, ss)
        truth = EdgeSet.from_matrix(K0 - np.diag(np.diag(K0)))
        if 0 < len(truth) < cfg.m * (cfg.m - 1) // 2:
            return K0, truth
    raise GenscoreError("could not draw a K0 with a nontrivial edge set")


def _sampler_cfg(cfg, seed):
    return SamplerConfig(burn_in=cfg.burn_in, thin=cfg.thin, seed=seed)


def run_trial(cfg: ExperimentConfig, k: int, trial: int):
    """AUCs of one trial, in ``cfg.settings()`` order (NaN where a setting failed).

    Returns ``(rows, errors)``.
    """
    K0, truth = _K0_for(cfg, k)
    model = ABModel(cfg.a, cfg.b, K0, None, cfg.centered)
    rep = check_normalizable(model)
    if not rep.ok:
        raise GenscoreError(f"K0 draw {k} fails {rep.condition}: {rep.detail}")
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(1, k, trial))
    s_cal, s_est = ss.spawn(2)
    c1 = calibrate_c1(model, cfg.domain_family, cfg.n, _sampler_cfg(cfg, _child_seed(s_cal)))
    dom = family_domain(cfg.domain_family, cfg.m, c1)
    X = gibbs_sample(model, dom, cfg.n, _sampler_cfg(cfg, _child_seed(s_est)))
    delta = default_delta(cfg.a, cfg.b, cfg.n, cfg.m, dom, cfg.centered)

    rows, errors, cache = [], [], {}
    for alpha, pi, mode in cfg.settings():
        # alpha = 0 gives unit weights whatever the truncation
        key = ("unit",) if (alpha == 0 and mode == "componentwise") else (alpha, pi, mode)
        if key not in cache:
            spec = WeightSpec(alpha, Truncation.quantile(pi), mode)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", HValidityWarning)
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    gg = assemble(cfg.a, cfg.b, cfg.centered, dom, spec, X)
                    path = fit_path(gg, delta, num_points=cfg.num_lambdas,
                                    min_ratio=cfg.min_ratio)
                cache[key] = roc_auc([f.edge_scores for f in path.fits], truth)
            except (GenscoreError, ValueError, np.linalg.LinAlgError) as exc:
                errors.append(f"K0 {k} trial {trial} alpha={alpha} pi={pi} {mode}: {exc}")
                cache[key] = math.nan
        rows.append({"family": cfg.domain_family, "a": cfg.a, "alpha": alpha, "pi": pi,
                     "mode": mode, "K0_index": k, "trial": trial, "auc": cache[key]})
    return rows, errors


def _run_cell(args):
    cfg, k, t = args
    try:
        return (k, t) + run_trial(cfg, k, t)
    except (GenscoreError, ValueError, np.linalg.LinAlgError) as exc:
        rows = [{"family": cfg.domain_family, "a": cfg.a, "alpha": al, "pi": pi, "mode": mo,
                 "K0_index": k, "trial": t, "auc": math.nan} for al, pi, mo in cfg.settings()]
        return k, t, rows, [f"K0 {k} trial {t}: {exc}"]


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def aggregate(self):
        return aggregate(self.rows)


def run_sweep(cfg: ExperimentConfig, workers=1, skip=(), on_cell=None) -> SweepResult:
    """Run every (K0, trial) cell not in ``skip``.

    ``on_cell(k, trial, rows, errors)`` is called as cells finish, in cell
    order, which lets callers checkpoint.  Rows come back sorted by cell.
    """
    skip = set(map(tuple, skip))
    cells = [(k, t) for k in range(cfg.n_K0) for t in range(cfg.trials_per_K0)
             if (k, t) not in skip]
    res = SweepResult(cfg)
    jobs = [(cfg, k, t) for k, t in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = ex.map(_run_cell, jobs)
            for k, t, rows, errs in outs:
                res.rows += rows
                res.errors += errs
                if on_cell:
                    on_cell(k, t, rows, errs)
    else:
        for job in jobs:
            k, t, rows, errs = _run_cell(job)
            res.rows += rows
            res.errors += errs
            if on_cell:
                on_cell(k, t, rows, errs)
    return res


def _sort_key(r):
    return (int(r["K0_index"]), int(r["trial"]), r["mode"], float(r["alpha"]), float(r["pi"]))


def aggregate(rows):
    """Mean AUC per setting and its ratio to the alpha = 0 baseline at the same pi."""
    groups = {}
    for r in rows:
        key = (r["family"], float(r["a"]), float(r["alpha"]), float(r["pi"]), r["mode"])
        groups.setdefault(key, []).append(float(r["auc"]))
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[4], k[2], k[3])):
        v = np.array(groups[key])
        ok = v[np.isfinite(v)]
        mean = float(ok.mean()) if ok.size else math.nan
        sd = float(ok.std(ddof=1)) if ok.size > 1 else math.nan
        out.append({"family": key[0], "a": key[1], "alpha": key[2], "pi": key[3],
                    "mode": key[4], "n_trials": int(ok.size), "mean_auc": mean, "sd_auc": sd})
    base = {(r["family"], r["a"], r["pi"]): r["mean_auc"] for r in out
            if r["alpha"] == 0 and r["mode"] == "componentwise"}
    for r in out:
        b = base.get((r["family"], r["a"], r["pi"]))
        r["ratio_to_alpha0"] = r["mean_auc"] / b if b else math.nan
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(rows, cols, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])


def write_trials_csv(rows, fh):
    _write(sorted(rows, key=_sort_key), TRIAL_COLUMNS, fh)


def write_aggregate_csv(agg, fh):
    _write(agg, AGG_COLUMNS, fh)


def read_trials_csv(fh):
    rows = []
    for r in csv.DictReader(fh):
        rows.append({"family": r["family"], "a": float(r["a"]), "alpha": float(r["alpha"]),
                     "pi": float(r["pi"]), "mode": r["mode"], "K0_index": int(r["K0_index"]),
                     "trial": int(r["trial"]), "auc": float(r["auc"])})
    return rows


def plot_sweep_svg(agg, path):
    """AUC against pi, one line per alpha, one file per family (suffix added)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "genscore"
    written = []
    fams = sorted({r["family"] for r in agg})
    stem = str(path)[:-4] if str(path).endswith(".svg") else str(path)
    for fam in fams:
        fig, ax = plt.subplots(figsize=(5, 4))
        sub = [r for r in agg if r["family"] == fam]
        for mode, al in sorted({(r["mode"], r["alpha"]) for r in sub}):
            pts = sorted((r["pi"], r["mean_auc"]) for r in sub if r["mode"] == mode and r["alpha"] == al)
            label = f"alpha={al:g}" if mode == "componentwise" else "g0"
            ax.plot([p for p, _ in pts], [v for _, v in pts], marker="o", label=label)
        ax.set_xlabel("pi")
        ax.set_ylabel("mean AUC")
        ax.set_title(fam)
        ax.legend(fontsize=7)
        single = len(fams) == 1 and str(path).endswith(".svg")
        out = str(path) if single else f"{stem}_{fam}.svg"
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
        written.append(out)
    return written
