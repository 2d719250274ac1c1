"""Command-line entry point: ``simulate``, ``detect``, ``losscurve`` and ``bench``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import lasso as _lasso
from .core import REGRESSION, GroundTruth, Segmentation, multivariate_data, regression_data
from .detector import METHODS, MODEL_NAMES, canonical_method, detect, make_model
from .exceptions import (
    CpdError,
    DataError,
    EnumerationLimitError,
    InvalidConfigError,
    SegmentInfeasibleError,
    TuningFailedError,
)
from .search import SearchConfig, loss_curve
from .simulation import DGP_NAMES, DgpSpec, generate, hausdorff

log = logging.getLogger("cfcpd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 2, 3, 4
BENCH_COLUMNS = ["rep", "method", "hausdorff", "directed1", "directed2", "seed", "error"]


# ----------------------------------------------------------------------- I/O


def _fmt(v):
    return format(float(v), ".17g")


def write_dataset(data, path):
    """CSV with header ``y,x1..xp`` (regression) or ``z1..zp``; 17 significant digits."""
    path = Path(path)
    p = data.p
    if data.kind == REGRESSION:
        header = ["y"] + [f"x{j}" for j in range(1, p + 1)]
        M = np.column_stack([data.y, data.X])
    else:
        header = [f"z{j}" for j in range(1, p + 1)]
        M = np.asarray(data.X)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, M, fmt="%.17g", delimiter=",")
    if data.truth is not None:
        write_truth(data.truth, truth_path(path))


def truth_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".truth.json")


def write_truth(truth, path):
    doc = {
        "taus": list(truth.changepoints.taus),
        "params": [[float(v) for v in f] for f in truth.segment_params],
        "noise_sd": [float(s) for s in truth.noise_sd],
        "n": truth.changepoints.n,
        "dgp": {k: v for k, v in truth.meta.items() if isinstance(v, (str, int, float))},
    }
    if truth.noise is not None:
        doc["noise"] = [float(v) for v in truth.noise]
    Path(path).write_text(json.dumps(doc))


def read_truth(path, n):
    doc = json.loads(Path(path).read_text())
    noise = doc.get("noise")
    return GroundTruth(Segmentation(doc["taus"], doc.get("n", n)), tuple(doc["params"]),
                       tuple(doc["noise_sd"]), None,
                       None if noise is None else np.asarray(noise), dict(doc.get("dgp", {})))


def read_dataset(path, with_truth=True):
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            M = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if M.shape[1] != len(header):
        raise DataError(f"{path}: header has {len(header)} columns, rows have {M.shape[1]}")
    tp = truth_path(path)
    truth = read_truth(tp, M.shape[0]) if with_truth and tp.exists() else None
    if header[0] == "y":
        return regression_data(M[:, 1:], M[:, 0], truth)
    if header[0] == "z1":
        return multivariate_data(M, truth)
    raise DataError(f"{path}: unrecognised header {header[:3]}")


# --------------------------------------------------------------- arguments


def _add_model_args(ap):
    ap.add_argument("--model", choices=MODEL_NAMES)
    ap.add_argument("--method", choices=list(METHODS) + ["cf-cv-star"])
    ap.add_argument("--folds", type=int, dest="folds")
    ap.add_argument("--dm", type=int)
    ap.add_argument("--k", type=int, dest="K", help="number of changepoints (fixed-K mode)")
    ap.add_argument("--gamma", type=float, help="per-changepoint penalty (penalised mode)")
    ap.add_argument("--stride", type=int, help="candidate boundary stride (1 = complete search)")
    ap.add_argument("--lam", type=float, help="lambda for lasso-fixed")
    ap.add_argument("--knn-k", type=int, dest="knn_k", help="fixed neighbour count")
    ap.add_argument("--grid-size", type=int, dest="grid_size")
    ap.add_argument("--grid-ratio", type=float, dest="grid_ratio")


def _add_dgp_args(ap):
    ap.add_argument("--dgp", choices=DGP_NAMES)
    ap.add_argument("--b", type=float)
    ap.add_argument("--se", type=float)
    ap.add_argument("--n", type=int)
    ap.add_argument("--p", type=int)
    ap.add_argument("--seed", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="cfcpd", description="cross-fitted changepoint detection")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated dataset and its truth sidecar")
    _add_dgp_args(s)
    s.add_argument("--rep", type=int)
    s.add_argument("--out")

    d = sub.add_parser("detect", help="detect changepoints in a CSV dataset")
    d.add_argument("--data", required=True)
    _add_model_args(d)
    d.add_argument("--seed", type=int)
    d.add_argument("--out")

    c = sub.add_parser("losscurve", help="total loss for every single-changepoint split")
    c.add_argument("--data", required=True)
    _add_model_args(c)
    c.add_argument("--out")

    b = sub.add_parser("bench", help="replicate detection over simulated datasets")
    _add_dgp_args(b)
    _add_model_args(b)
    b.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    b.add_argument("--reps", type=int)
    b.add_argument("--parallelism", type=int)
    b.add_argument("--config", help="JSON file with bench settings; flags override it")
    b.add_argument("--out")
    b.add_argument("--summary")
    return ap


# ----------------------------------------------------------------- settings


@dataclass
class BenchConfig:
    dgp: str = "dgp1"
    b: float = None
    se: float = None
    n: int = None
    p: int = None
    methods: list = field(default_factory=lambda: ["cf-cv"])
    model: str = "lasso-cv"
    folds: int = 5
    dm: int = None
    K: int = None
    gamma: float = None
    stride: int = 1
    lam: float = None
    knn_k: int = None
    grid_size: int = _lasso.DEFAULT_GRID_SIZE
    grid_ratio: float = _lasso.DEFAULT_GRID_RATIO
    reps: int = 1
    seed: int = 0
    parallelism: int = 1
    out: str = None
    summary: str = None

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = [m for m in self.methods.split(",") if m]
        self.methods = [canonical_method(m) for m in self.methods]
        if not self.methods:
            raise InvalidConfigError("methods must be nonempty")
        if int(self.reps) < 1:
            raise InvalidConfigError("reps must be >= 1")
        if int(self.parallelism) < 1:
            raise InvalidConfigError("parallelism must be >= 1")

    def dgp_spec(self):
        params = {"b": self.b, "se": self.se, "n": self.n, "p": self.p}
        return DgpSpec(self.dgp, {k: v for k, v in params.items() if v is not None}, int(self.seed))


def bench_config_from(args):
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
    names = {f.name for f in fields(BenchConfig)}
    unknown = set(doc) - names
    if unknown:
        raise InvalidConfigError(f"unknown config keys {sorted(unknown)}")
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    if getattr(args, "method", None) and args.methods is None:
        doc["methods"] = [args.method]
    return BenchConfig(**doc)


def _search_config(K, gamma, dm, folds, stride, default_K=1):
    d_m = dm if dm is not None else 4 * folds
    if gamma is not None:
        return SearchConfig.penalized(gamma, d_m, stride or 1)
    return SearchConfig.fixed_k(default_K if K is None else K, d_m, stride or 1)


def _model_from(args, default="gaussian-mean"):
    kw = {}
    if getattr(args, "grid_size", None):
        kw["grid_size"] = args.grid_size
    if getattr(args, "grid_ratio", None):
        kw["grid_ratio"] = args.grid_ratio
    return make_model(args.model or default, args.lam, args.knn_k, **kw)


# ----------------------------------------------------------------- commands


def cmd_simulate(args):
    if not args.out:
        raise _Usage("simulate needs --out")
    if not args.dgp:
        raise _Usage("simulate needs --dgp")
    params = {k: getattr(args, k) for k in ("b", "se", "n", "p") if getattr(args, k) is not None}
    data = generate(DgpSpec(args.dgp, params, args.seed or 0), args.rep)
    write_dataset(data, args.out)
    log.info("wrote %s (%d rows)", args.out, data.n)
    return EXIT_OK


def _write_json(doc, out):
    text = json.dumps(doc, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_detect(args):
    data = read_dataset(args.data)
    model = _model_from(args)
    folds = args.folds or 5
    config = _search_config(args.K, args.gamma, args.dm, folds, args.stride)
    method = args.method or "cf-cv"
    res = detect(data, model, method, config, folds, seed=args.seed)
    doc = res.to_dict()
    doc["model"] = res.config.get("model")
    doc["runtime_ms"] = res.stats["runtime_ms"]
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_losscurve(args):
    data = read_dataset(args.data)
    model = _model_from(args)
    folds = args.folds or 5
    d_m = args.dm if args.dm is not None else 4 * folds
    method = canonical_method(args.method or "cf-cv")
    if method in ("in-ho", "cf-ho"):
        raise InvalidConfigError("loss curves need a per-segment method (in-cv, cf-cv, cf-cv*)")
    curve = loss_curve(data, model, method, data.n, d_m, folds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "total_loss", "method", "model"])
    name = args.model or "gaussian-mean"
    for tau, val in curve:
        w.writerow([tau, _fmt(val), method, name])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def run_replication(cfg: BenchConfig, rep: int):
    """Rows ``(rep, method, hausdorff, d1, d2, seed, error)`` and timings for one replication."""
    data = generate(cfg.dgp_spec(), rep)
    true = list(data.truth.changepoints.taus)
    search = _search_config(cfg.K, cfg.gamma, cfg.dm, cfg.folds, cfg.stride, len(true))
    model = make_model(cfg.model, cfg.lam, cfg.knn_k, cfg.grid_size, cfg.grid_ratio)
    rows, times = [], []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            res = detect(data, model, method, search, cfg.folds, seed=cfg.seed)
            h, (d1, d2) = hausdorff(true, res.taus, data.n)
            rows.append([rep, method, h, d1, d2, cfg.seed, ""])
        except CpdError as exc:
            rows.append([rep, method, "", "", "", cfg.seed, type(exc).__name__])
        times.append([rep, method, 1000.0 * (time.perf_counter() - t0)])
    return rows, times


def _summarise(rows, methods):
    out = {}
    for m in methods:
        vals = np.array([float(r[2]) for r in rows if r[1] == m and r[2] != ""])
        failed = sum(1 for r in rows if r[1] == m and r[2] == "")
        entry = {"n": int(vals.size), "failed": failed}
        if vals.size:
            q = np.quantile(vals, [0.1, 0.25, 0.5, 0.75, 0.9])
            entry.update(mean=float(vals.mean()), median=float(q[2]), q10=float(q[0]),
                         q25=float(q[1]), q75=float(q[3]), q90=float(q[4]))
        out[m] = entry
    return out


def run_bench(cfg: BenchConfig):
    reps = range(int(cfg.reps))
    results = {}
    if cfg.parallelism == 1:
        for r in reps:
            results[r] = run_replication(cfg, r)
    else:
        with ProcessPoolExecutor(max_workers=int(cfg.parallelism)) as ex:
            futs = {r: ex.submit(run_replication, cfg, r) for r in reps}
            for r, fut in futs.items():
                results[r] = fut.result()
    rows = [row for r in reps for row in results[r][0]]
    times = [t for r in reps for t in results[r][1]]
    return rows, times


def cmd_bench(args):
    cfg = bench_config_from(args)
    if not cfg.out:
        raise _Usage("bench needs --out (or 'out' in the config file)")
    rows, times = run_bench(cfg)
    out = Path(cfg.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        w.writerows(rows)
    timing = out.with_name(out.stem + ".timing.csv")
    with open(timing, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "method", "runtime_ms"])
        w.writerows([[r, m, f"{t:.3f}"] for r, m, t in times])
    summary = {"config": {f.name: getattr(cfg, f.name) for f in fields(BenchConfig)},
               "hausdorff": _summarise(rows, cfg.methods)}
    spath = Path(cfg.summary) if cfg.summary else out.with_name(out.stem + ".summary.json")
    spath.write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


class _Usage(Exception):
    pass


_COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "losscurve": cmd_losscurve,
             "bench": cmd_bench}


def _setup_logging():
    level = os.environ.get("CPD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidConfigError, SegmentInfeasibleError, TuningFailedError,
            EnumerationLimitError) as exc:
        where = getattr(exc, "interval", None)
        suffix = f" (segment {where})" if where is not None else ""
        print(f"infeasible: {exc}{suffix}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
