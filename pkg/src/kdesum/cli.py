"""Command-line front end: ``python -m kdesum {gen,kde,bench,cv,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from pathlib import Path

import numpy as np

from .cv import CONVOLUTION_RULES, SCORE_KINDS, bandwidth_sweep, log_scales, pilot_bandwidth
from .dataset import GENERATORS, PointFileError, gaussian_normalizer, generate, load_points, save_values
from .engine import ALGORITHMS, EngineConfig, ReferenceModel, naive_kde, run_engine, verify_relative_error
from .gridfft import GridInfeasible, gridfft_auto
from .kdtree import DEFAULT_LEAF_THRESHOLD

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2

INF_MARK, INFEASIBLE_MARK = "∞", "X"


class UsageError(Exception):
    pass


def _scales(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty scale list")
    return vals


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _engine_flags(p: argparse.ArgumentParser, algorithm: bool = True) -> None:
    p.add_argument("--epsilon", type=_nonneg, default=0.01, help="relative error tolerance (default 0.01)")
    p.add_argument("--leaf-threshold", type=_positive_int, default=DEFAULT_LEAF_THRESHOLD)
    p.add_argument("--pmax", type=_positive_int, default=None, help="truncation order cap (default per dimension)")
    if algorithm:
        p.add_argument("--algorithm", choices=ALGORITHMS, default="dfgt")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kdesum", description="Gaussian kernel sums with relative error guarantees.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic point set")
    g.add_argument("--kind", choices=GENERATORS, default="mixture")
    g.add_argument("-n", type=_positive_int, required=True)
    g.add_argument("-d", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)

    k = sub.add_parser("kde", help="density at each query point")
    k.add_argument("--refs", required=True)
    k.add_argument("--queries", help="defaults to the reference set")
    k.add_argument("--bandwidth", type=float, help="default: pilot rule on the references")
    _engine_flags(k)
    k.add_argument("--sums", action="store_true", help="write raw kernel sums instead of densities")
    k.add_argument("--dump-tree", action="store_true", help="print the reference kd-tree to stderr")
    k.add_argument("-o", "--output", help="default: stdout")

    b = sub.add_parser("bench", help="timing and error table across scales and algorithms")
    b.add_argument("--refs", required=True)
    b.add_argument("--queries")
    b.add_argument("--base-h", type=float)
    b.add_argument("--scales", type=_scales, default=log_scales())
    b.add_argument("--algorithms", default="naive,dfd,dfgt,gridfft")
    _engine_flags(b, algorithm=False)
    b.add_argument("--naive-cap", type=float, default=1e8,
                   help="query x reference pairs above which naive is timed on a subsample and extrapolated")
    b.add_argument("--check-queries", type=_positive_int, default=1000,
                   help="queries checked against brute force when the full naive run is skipped")
    b.add_argument("-o", "--output")

    c = sub.add_parser("cv", help="cross-validation score over a bandwidth sweep")
    c.add_argument("--refs", required=True)
    c.add_argument("--base-h", type=float)
    c.add_argument("--scales", type=_scales, default=log_scales())
    c.add_argument("--score", choices=SCORE_KINDS, default="lscv")
    c.add_argument("--convolution-bandwidth", choices=tuple(CONVOLUTION_RULES), default="2x")
    c.add_argument("--verify", action="store_true", help="record the max relative error against brute force")
    _engine_flags(c)
    c.add_argument("-o", "--output")

    v = sub.add_parser("verify", help="max relative error of an approximation; exit 1 above epsilon")
    v.add_argument("--approx", help="file of approximate values")
    v.add_argument("--exact", help="file of exact values")
    v.add_argument("--refs", help="run --algorithm on these and compare with brute force instead")
    v.add_argument("--queries")
    v.add_argument("--bandwidth", type=float)
    _engine_flags(v)
    return ap


def _config(args, algorithm: str | None = None) -> EngineConfig:
    return EngineConfig(
        epsilon=args.epsilon,
        leaf_threshold=args.leaf_threshold,
        p_max=args.pmax,
        algorithm=algorithm or getattr(args, "algorithm", "dfgt"),
    )


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt_err(e: float) -> str:
    if math.isnan(e):
        return ""
    return f"{e:.3e}"


def _load_pair(args):
    refs = load_points(args.refs)
    queries = load_points(args.queries) if args.queries else None
    return refs, queries


def cmd_gen(args) -> int:
    save_values(args.output, generate(args.kind, args.n, args.d, args.seed).data)
    return EXIT_OK


def cmd_kde(args) -> int:
    refs, queries = _load_pair(args)
    h = args.bandwidth if args.bandwidth is not None else pilot_bandwidth(refs)
    config = _config(args)
    if args.algorithm in ("dfd", "dfgt"):
        model = ReferenceModel(refs, args.leaf_threshold)
        if args.dump_tree:
            print(model.tree.dump(), file=sys.stderr)
        sums = run_engine(args.algorithm, queries or model, model, h, config)
    else:
        sums = run_engine(args.algorithm, queries or refs, refs, h, config)
    values = sums if args.sums else sums / (refs.n * gaussian_normalizer(refs.d, h))
    if args.output is None:
        buf = io.StringIO()
        np.savetxt(buf, values, fmt="%.17g")
        _write(buf.getvalue(), None)
    else:
        save_values(args.output, values)
    return EXIT_OK


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def cmd_bench(args) -> int:
    refs, queries = _load_pair(args)
    q = queries or refs
    algos = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in algos:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}")
    base_h = args.base_h if args.base_h is not None else pilot_bandwidth(refs)
    full_naive = q.n * refs.n <= args.naive_cap
    if full_naive:
        check = np.arange(q.n)
    else:
        check = np.unique(np.linspace(0, q.n - 1, min(q.n, args.check_queries)).astype(np.int64))

    rows = []
    for s in args.scales:
        h = s * base_h
        # reference answers for the checked queries; doubles as the naive timing
        exact, t_naive = _timed(lambda: naive_kde(q.data[check], refs, h))
        if not full_naive:
            t_naive *= q.n / len(check)
        for a in algos:
            if a == "naive":
                rows.append([f"{s:g}", f"{h:.6g}", a, f"{t_naive:.3f}", _fmt_err(0.0),
                             "ok" if full_naive else "extrapolated"])
                continue
            if a == "gridfft":
                out, t = _timed(lambda: gridfft_auto(q, refs, h, args.epsilon, exact=exact if full_naive else None,
                                                      check_limit=args.check_queries))
                if out.status == "ok":
                    err = verify_relative_error(out.sums[check], exact)[0]
                    rows.append([f"{s:g}", f"{h:.6g}", a, f"{t:.3f}", _fmt_err(err), "ok"])
                else:
                    mark = INF_MARK if out.status == "inf" else INFEASIBLE_MARK
                    rows.append([f"{s:g}", f"{h:.6g}", a, mark, "", out.status])
                continue
            config = _config(args, a)
            if queries is None:
                sums, t = _timed(lambda: run_engine(a, m := ReferenceModel(refs, args.leaf_threshold), m, h, config))
            else:
                sums, t = _timed(lambda: run_engine(a, q, refs, h, config))
            err = verify_relative_error(sums[check], exact)[0]
            rows.append([f"{s:g}", f"{h:.6g}", a, f"{t:.3f}", _fmt_err(err), "ok"])
    _write(_table(["scale", "h", "algorithm", "seconds", "max_rel_err", "status"], rows), args.output)
    return EXIT_OK


def cmd_cv(args) -> int:
    refs = load_points(args.refs)
    scales = sorted(args.scales)
    results = bandwidth_sweep(refs, scales, args.base_h, kind=args.score, engine=args.algorithm,
                              config=_config(args), convolution=args.convolution_bandwidth, verify=args.verify)
    rows = [[f"{r.scale:g}", f"{r.h:.6g}", f"{r.score:.10g}", f"{r.seconds:.3f}", _fmt_err(r.max_rel_err)]
            for r in results]
    _write(_table(["scale", "h", "score", "seconds", "max_rel_err"], rows), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.approx or args.exact:
        if not (args.approx and args.exact):
            raise UsageError("--approx and --exact go together")
        approx = load_points(args.approx).data.ravel()
        exact = load_points(args.exact).data.ravel()
    elif args.refs:
        refs, queries = _load_pair(args)
        h = args.bandwidth if args.bandwidth is not None else pilot_bandwidth(refs)
        approx = run_engine(args.algorithm, queries or refs, refs, h, _config(args))
        exact = naive_kde(queries or refs, refs, h)
    else:
        raise UsageError("give --approx/--exact files or --refs")
    err, idx, _ = verify_relative_error(approx, exact)
    print(f"max_rel_err={err:.6e} index={idx}")
    if err > args.epsilon:
        print(f"FAIL: relative error {err:.6e} at index {idx} exceeds epsilon {args.epsilon:g}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "kde": cmd_kde, "bench": cmd_bench, "cv": cmd_cv, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, PointFileError, ValueError, GridInfeasible, UsageError) as exc:
        print(f"kdesum {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
