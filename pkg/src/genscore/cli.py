"""``genscore`` command line: estimate, sample, sweep, univariate, domain.

Exit codes: 0 ok, 2 invalid input, 3 numerical warning (outputs still
written), 64 usage error.  Every command but ``domain`` writes a run
manifest holding a digest of its inputs; reruns with the same digest give
byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ab_model import ABModel, load_model
from .domain import (contains_batch, domain_from_json, g0_batch, phi_batch)
from .errors import ConvergenceWarning, GenscoreError, UnsupportedDomainError
from .estimator import (HValidityWarning, assemble, default_delta, fit_path,
                        write_path_csv)
from .experiments import (ExperimentConfig, aggregate, plot_sweep_svg, read_trials_csv,
                          run_sweep, write_aggregate_csv, write_trials_csv)
from .sampler import SamplerConfig, config_sidecar, gibbs_sample, write_samples_csv
from .univariate import curve_from_json, variance_curve, write_curve_csv
from .weights import WeightSpec, load_weights

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# manifest

@dataclass
class RunManifest:
    command: str
    digest: str
    seed: int | None = None
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def input_digest(command, params: dict, files=()) -> str:
    """sha256 over the canonical JSON of the parameters and the input file bytes."""
    h = hashlib.sha256()
    h.update(json.dumps({"command": command, "params": params}, sort_keys=True,
                        separators=(",", ":")).encode())
    for f in files:
        h.update(b"\0file\0")
        h.update(Path(f).read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# input helpers

def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from None


def read_data_csv(path) -> np.ndarray:
    """n x m float matrix; an optional non-numeric first line is a header."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read data file {path}: {exc.strerror}") from None
    rows = []
    width = None
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if lineno == 1:
                    continue
                raise InputError(f"{path}: row {lineno} is not numeric: {','.join(rec)}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise InputError(f"{path}: row {lineno} has {len(vals)} fields, expected {width}")
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: row {lineno} has a non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _parse_point(text, dim=None):
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"cannot parse point {text!r}") from None
    if dim is not None and x.size != dim:
        raise InputError(f"point {text!r} has {x.size} coordinates, domain has {dim}")
    return x


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------------------
# commands

def cmd_estimate(args, threads):
    data_path, dom_path = args.data, args.domain
    X = read_data_csv(data_path)
    domain = domain_from_json(_load_json(dom_path, "domain"))
    if X.shape[1] != domain.dim:
        raise InputError(f"data has {X.shape[1]} columns, domain has dim {domain.dim}")
    inside = contains_batch(domain, X)
    if not inside.all():
        bad = (np.nonzero(~inside)[0] + 1).tolist()
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise InputError(f"{len(bad)} data rows lie outside the domain (rows {shown})")
    weight = load_weights(args.weights) if args.weights else WeightSpec(args.alpha)
    files = [data_path, dom_path] + ([args.weights] if args.weights else [])
    skip = ("func", "threads", "data", "domain", "weights", "out")
    params = {k: v for k, v in vars(args).items() if k not in skip}
    params["weight"] = weight.to_json()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest("estimate", input_digest("estimate", params, files), started=_now())

    n, m = X.shape
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gg = assemble(args.a, args.b, args.centered, domain, weight, X)
        if args.delta == "auto":
            delta = default_delta(args.a, args.b, n, m, domain, args.centered)
        else:
            delta = float(args.delta)
        ratio = "profile" if args.profile else args.eta_ratio
        path = fit_path(gg, delta, ratio, lambdas=args.lam, num_points=args.num_lambdas,
                        min_ratio=args.min_ratio, tol=args.tol, max_iter=args.max_iter)
    for w in caught:
        if issubclass(w.category, (ConvergenceWarning, HValidityWarning)):
            man.warnings.append(f"{w.category.__name__}: {w.message}")
    with open(out / "path.csv", "w", newline="") as fh:
        write_path_csv(path, fh)
    man.outputs.append(str(out / "path.csv"))
    man.extra["delta"] = path.delta
    man.extra["converged"] = path.converged
    if args.nedges is not None:
        sel = path.select_by_edges(args.nedges)
        with open(out / "edges.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "score"])
            S = sel.edge_scores
            for i, j in sel.edges():
                w.writerow([i + 1, j + 1, _fmt(S[i, j])])
        man.outputs.append(str(out / "edges.csv"))
        man.extra["selected_lambda_K"] = sel.lambda_K
        man.extra["selected_n_edges"] = sel.n_edges()
    man.finished = _now()
    man.write(out / "manifest.json")
    for msg in man.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    if not path.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sample(args, threads):
    model = ABModel.from_json(_load_json(args.model, "model"))
    domain = domain_from_json(_load_json(args.domain, "domain"))
    init = "auto" if args.init is None else _parse_point(args.init, domain.dim)
    cfg = SamplerConfig(burn_in=args.burn_in, thin=args.thin, seed=args.seed,
                        grid_points=args.grid_points, tail_cutoff_nats=args.tail_cutoff,
                        init=init, method=args.method)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    params = {"n": args.n, "sampler": cfg.to_json(), "header": args.header}
    man = RunManifest("sample", input_digest("sample", params, [args.model, args.domain]),
                      seed=args.seed, started=_now())
    X = gibbs_sample(model, domain, args.n, cfg)
    with open(out, "w", newline="") as fh:
        write_samples_csv(X.reshape(-1, model.dim), fh, args.header)
    side = Path(str(out) + ".json")
    side.write_text(config_sidecar(model, domain, args.n, cfg) + "\n")
    man.outputs += [str(out), str(side)]
    man.finished = _now()
    man.write(Path(str(out) + ".manifest.json"))
    return EXIT_OK


def cmd_sweep(args, threads):
    raw = _load_json(args.config, "experiment")
    cfg = ExperimentConfig.from_json(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = input_digest("sweep", cfg.to_json())
    trials_path = out / "trials.csv"
    man_path = out / "manifest.json"
    rows, done = [], set()
    if args.resume and man_path.exists() and trials_path.exists():
        old = RunManifest.read(man_path)
        if old.digest != digest:
            raise InputError("existing manifest was produced by a different experiment config")
        done = {tuple(c) for c in old.extra.get("completed", [])}
        with open(trials_path, newline="") as fh:
            rows = [r for r in read_trials_csv(fh) if (r["K0_index"], r["trial"]) in done]
    man = RunManifest("sweep", digest, seed=cfg.seed, started=_now())
    errors = []

    def checkpoint(k, t, new_rows, errs):
        rows.extend(new_rows)
        errors.extend(errs)
        done.add((k, t))
        with open(trials_path, "w", newline="") as fh:
            write_trials_csv(rows, fh)
        man.extra["completed"] = sorted([list(c) for c in done])
        man.write(man_path)

    run_sweep(cfg, workers=threads, skip=done, on_cell=checkpoint)
    with open(trials_path, "w", newline="") as fh:
        write_trials_csv(rows, fh)
    agg = aggregate(rows)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        write_aggregate_csv(agg, fh)
    man.outputs = [str(trials_path), str(out / "aggregate.csv")]
    if args.svg:
        man.outputs += plot_sweep_svg(agg, out / "auc")
    man.extra["completed"] = sorted([list(c) for c in done])
    man.warnings = errors
    man.finished = _now()
    man.write(man_path)
    for e in errors:
        print(f"warning: {e}", file=sys.stderr)
    return EXIT_NUMERIC if errors else EXIT_OK


def cmd_univariate(args, threads):
    raw = _load_json(args.spec, "univariate")
    kw = curve_from_json(raw)
    rows = variance_curve(**kw)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_curve_csv(rows, fh)
    man = RunManifest("univariate", input_digest("univariate", raw), started=_now())
    man.outputs = [str(out)]
    man.finished = _now()
    man.write(Path(str(out) + ".manifest.json"))
    return EXIT_OK


def _grid_points(spec, dim):
    if dim != 2:
        raise InputError("--grid needs a 2-dimensional domain")
    axes = []
    for part in spec.split(","):
        try:
            lo, hi, k = part.split(":")
            axes.append(np.linspace(float(lo), float(hi), int(k)))
        except ValueError:
            raise InputError(f"bad grid axis {part!r}; expected lo:hi:count") from None
    if len(axes) != 2:
        raise InputError("--grid needs two axes, e.g. -1:1:50,-1:1:50")
    gx, gy = np.meshgrid(axes[0], axes[1], indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


def cmd_domain(args, threads):
    domain = domain_from_json(_load_json(args.domain, "domain"))
    m = domain.dim
    C = np.full(m, math.inf) if args.C is None else np.array(
        [float(c) for c in args.C.split(",")] if "," in args.C else [float(args.C)] * m)
    if C.size != m or np.any(C <= 0):
        raise InputError("--C needs one positive value or one per coordinate")
    if args.grid:
        P = _grid_points(args.grid, m)
    else:
        if not args.probe:
            raise InputError("give at least one --probe point or a --grid")
        P = np.array([_parse_point(p, m) for p in args.probe])
    inside = contains_batch(domain, P)
    vals = np.full((len(P), m), np.nan)
    g0 = np.full(len(P), np.nan)
    if inside.any():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vals[inside] = phi_batch(domain, C, P[inside], check=False)[0]
            try:
                # g0 takes one truncation point; use the smallest when several are given
                g0[inside] = g0_batch(domain, C.min(), P[inside], check=False)[0]
            except UnsupportedDomainError:
                pass
    if args.grid:
        out = sys.stdout if args.out is None else open(args.out, "w", newline="")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x1", "x2", "inside"] + [f"phi{j + 1}" for j in range(m)] + ["g0"])
        for i, p in enumerate(P):
            w.writerow([_fmt(p[0]), _fmt(p[1]), int(inside[i])] + [_fmt(v) for v in vals[i]]
                       + [_fmt(g0[i])])
        if out is not sys.stdout:
            out.close()
        return EXIT_OK
    flagged = False
    for i, p in enumerate(P):
        print(f"point ({', '.join(f'{v:g}' for v in p)})")
        if not inside[i]:
            print("  outside the domain")
            flagged = True
            continue
        for j in range(m):
            print(f"  x{j + 1}: section {domain.section(p, j)!r}  phi = {vals[i, j]:.12g}")
        print(f"  g0 = {g0[i]:.12g}" if math.isfinite(g0[i]) or g0[i] == math.inf
              else "  g0 = unavailable for this domain")
    return EXIT_INPUT if flagged else EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser():
    p = _Parser(prog="genscore", description="Generalized score matching on general domains.")
    p.add_argument("--version", action="version", version=f"genscore {__version__}")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker processes for sweeps (default: $GENSCORE_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="fit a regularization path to a data file")
    e.add_argument("data", help="CSV data matrix (n rows, m columns)")
    e.add_argument("domain", help="domain JSON")
    e.add_argument("--weights", help="weights JSON (default: alpha from --alpha, no truncation)")
    e.add_argument("--alpha", type=float, default=1.0, help="weight exponent when --weights is not given")
    e.add_argument("-a", type=float, default=1.0, help="interaction exponent a (0 means log)")
    e.add_argument("-b", type=float, default=1.0, help="linear exponent b (0 means log)")
    e.add_argument("--centered", action="store_true", help="fit K only (no eta)")
    grp = e.add_mutually_exclusive_group()
    grp.add_argument("--lambda", dest="lam", type=float, nargs="+", help="explicit lambda_K values")
    grp.add_argument("--num-lambdas", type=_positive_int, default=50, help="path length")
    e.add_argument("--min-ratio", type=float, default=1e-3, help="smallest lambda over lambda_max")
    e.add_argument("--nedges", type=_nonneg_int, help="also write the edge list at the largest "
                   "lambda with at least this many edges")
    e.add_argument("--profile", action="store_true", help="profile out eta (unpenalized)")
    e.add_argument("--eta-ratio", type=float, default=1.0, help="lambda_eta / lambda_K")
    e.add_argument("--delta", default="auto", help="diagonal multiplier: auto or a number >= 1")
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--max-iter", type=_positive_int, default=1000)
    e.add_argument("-o", "--out", required=True, help="output directory")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sample", help="Gibbs-sample an a-b model on a domain")
    s.add_argument("model", help="model JSON")
    s.add_argument("domain", help="domain JSON")
    s.add_argument("-n", type=_nonneg_int, required=True, help="number of samples")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burn-in", type=_nonneg_int, default=1000)
    s.add_argument("--thin", type=_positive_int, default=None, help="sweeps per kept sample (default m)")
    s.add_argument("--grid-points", type=int, default=2048)
    s.add_argument("--tail-cutoff", type=float, default=40.0, help="tail cutoff in nats")
    s.add_argument("--init", help="comma-separated starting point (default: search)")
    s.add_argument("--method", choices=("auto", "grid"), default="auto")
    s.add_argument("--header", action="store_true", help="write a header row")
    s.add_argument("-o", "--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_sample)

    w = sub.add_parser("sweep", help="support-recovery simulation sweep")
    w.add_argument("config", help="experiment JSON")
    w.add_argument("-o", "--out", required=True, help="output directory")
    w.add_argument("--resume", action="store_true", help="skip cells completed in an earlier run")
    w.add_argument("--svg", action="store_true", help="also write AUC-vs-pi SVG charts")
    w.set_defaults(func=cmd_sweep)

    u = sub.add_parser("univariate", help="asymptotic variance curves for the univariate model")
    u.add_argument("spec", help="univariate study JSON")
    u.add_argument("-o", "--out", required=True, help="output CSV")
    u.set_defaults(func=cmd_univariate)

    d = sub.add_parser("domain", help="print sections, phi and g0 at probe points")
    d.add_argument("domain", help="domain JSON")
    d.add_argument("--probe", action="append", help="comma-separated point (repeatable)")
    d.add_argument("--grid", help="2-D grid lo:hi:count,lo:hi:count written as CSV "
                   "(use --grid=... when the first value is negative)")
    d.add_argument("--C", help="truncation: one value or one per coordinate (default inf)")
    d.add_argument("-o", "--out", help="CSV file for --grid (default stdout)")
    d.set_defaults(func=cmd_domain)
    return p


def resolve_threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get("GENSCORE_THREADS", "").strip()
    if env:
        try:
            v = int(env)
        except ValueError:
            v = 0
        if v < 1:
            raise InputError(f"GENSCORE_THREADS must be a positive integer, got {env!r}")
        return v
    return os.cpu_count() or 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = resolve_threads(args.threads)
        return args.func(args, threads)
    except (InputError, GenscoreError, ValueError) as exc:
        print(f"genscore {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FloatingPointError as exc:
        print(f"genscore {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
