"""Command-line entry point: ``lamqsd <command> [options]``.

Exit codes: 0 success, 1 failed check or indeterminate verdict, 2 usage
error, 3 numerical non-convergence.
"""
import argparse
import json
import os
import sys
from collections import Counter
from pathlib import Path

from . import spectral as sp
from ._jit import set_threads
from .branching import DEFAULT_BUDGET
from .estimators import (McConfig, estimate_good_paths, estimate_to_json,
                         estimates_to_rows, rows_to_csv)
from .geometry import run_construction
from .rng import entropy_seed
from .svg import render_lamination
from .verify import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "LAMQSD_THREADS"


def _int_at_least(lo, hi=None):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        if hi is not None and v > hi:
            raise argparse.ArgumentTypeError(f"must be <= {hi}, got {v}")
        return v
    return parse


def _add_seed(p):
    p.add_argument("--seed", type=_int_at_least(0, 2**64 - 1),
                   help="master seed (drawn from system entropy and printed if omitted)")


def _add_threads(p):
    p.add_argument("--threads", type=_int_at_least(1),
                   help=f"worker threads (overrides ${THREADS_ENV})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lamqsd",
        description="Random laminations, killed label chains and their spectra.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("lam", help="run the polygon-throwing construction")
    p.add_argument("--k", type=_int_at_least(2), required=True, help="polygon size")
    p.add_argument("--throws", type=_int_at_least(0), required=True)
    _add_seed(p)
    _add_threads(p)
    p.add_argument("--svg", type=Path, default=Path("lamination.svg"))
    p.add_argument("--tree", type=Path, default=Path("genealogy.tsv"),
                   help="genealogy: address, label, throw index per line")
    p.add_argument("--hyperbolic", action="store_true",
                   help="draw chords as arcs orthogonal to the circle")
    p.add_argument("--size", type=_int_at_least(64), default=512, help="SVG size in px")

    p = sub.add_parser("labels", help="Monte Carlo estimates of good-path counts")
    p.add_argument("--k", type=_int_at_least(2), required=True)
    p.add_argument("--a", type=_int_at_least(1), required=True, help="kill threshold")
    p.add_argument("--x0", type=_int_at_least(0), required=True, help="root label")
    p.add_argument("--n", type=_int_at_least(0), nargs="+", required=True,
                   help="generation(s)")
    p.add_argument("--samples", type=_int_at_least(2), default=100_000)
    p.add_argument("--batches", type=_int_at_least(2), default=32)
    p.add_argument("--budget", type=_int_at_least(1), default=DEFAULT_BUDGET,
                   help="node budget per sample")
    _add_seed(p)
    _add_threads(p)
    p.add_argument("--out", type=Path, help="output file, .csv or .json")
    p.add_argument("--record-time", action="store_true",
                   help="include wall time (outputs are then not reproducible)")

    p = sub.add_parser("classify", help="sub/critical/supercritical verdict")
    p.add_argument("--k", type=_int_at_least(2), required=True)
    p.add_argument("--a", type=_int_at_least(2), required=True)
    p.add_argument("--N", type=_int_at_least(3), help="truncation (default: adaptive)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", type=Path, help="JSON report path")
    _add_threads(p)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("suite", choices=("all",) + SUITES)
    _add_seed(p)
    _add_threads(p)
    p.add_argument("--splits", type=_int_at_least(2), default=100_000,
                   help="splits per parent label in the geometry suite")

    p = sub.add_parser("spectral", help="dump spectral tables as CSV")
    p.add_argument("table", choices=("lambda", "g", "f", "q"))
    p.add_argument("--k", type=_int_at_least(2), default=2)
    p.add_argument("--a", type=_int_at_least(1), default=4)
    p.add_argument("--N", type=_int_at_least(3), nargs="+",
                   help="truncation level(s); lambda default 30 60 120 240")
    p.add_argument("--x-max", type=_int_at_least(4), default=60,
                   help="largest label for g and f")
    p.add_argument("--x0", type=_int_at_least(1), default=4)
    p.add_argument("--n", type=_int_at_least(0), default=40, help="steps for q")
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    _add_threads(p)
    return parser


# -- helpers ---------------------------------------------------------------

def _threads(args, parser):
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV, "").strip()
    if not env:
        return 1
    try:
        return _int_at_least(1)(env)
    except argparse.ArgumentTypeError as exc:
        parser.error(f"${THREADS_ENV}: {exc}")


def _seed(args):
    if args.seed is None:
        args.seed = entropy_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _check_writable(parser, *paths):
    for path in paths:
        if path is None:
            continue
        parent = path.parent if str(path.parent) else Path(".")
        if path.is_dir() or not parent.is_dir() or not os.access(parent, os.W_OK):
            parser.error(f"cannot write {path}")


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _validate(args, parser):
    if args.command == "lam":
        _check_writable(parser, args.svg, args.tree)
    elif args.command == "labels":
        if args.x0 < args.a:
            parser.error("--x0 must be at least --a")
        if args.samples < args.batches:
            parser.error("--samples must be at least --batches")
        if args.out is not None and args.out.suffix not in (".csv", ".json"):
            parser.error("--out must end in .csv or .json")
        _check_writable(parser, args.out)
    elif args.command == "classify":
        if args.N is not None and args.N < args.a + 1:
            parser.error("--N must be at least --a + 1")
        if not args.tol > 0:
            parser.error("--tol must be positive")
        _check_writable(parser, args.out)
    elif args.command == "spectral":
        if args.table in ("lambda", "q") and args.N and min(args.N) < args.a + 1:
            parser.error("--N must be at least --a + 1")
        if args.table == "q" and args.x0 < args.a:
            parser.error("--x0 must be at least --a")
        if args.table in ("g", "f") and (args.k, args.a) != (2, 4):
            parser.error("closed forms exist only for --k 2 --a 4")
        _check_writable(parser, args.out)


# -- commands --------------------------------------------------------------

def cmd_lam(args):
    lam = run_construction(args.k, args.throws, _seed(args))
    _write(args.svg, render_lamination(lam, hyperbolic=args.hyperbolic, size=args.size))
    _write(args.tree, "\n".join(lam.genealogy_lines()) + "\n")
    live = lam.live()
    hist = Counter(int(x) for x in lam.label[live])
    print(f"k={args.k} throws={args.throws} seed={args.seed}")
    print(f"accepted: {lam.accepted}")
    print(f"max depth: {int(lam.depth.max())}")
    print(f"live fragments: {live.size}")
    print("label histogram (live fragments):")
    for label in sorted(hist):
        print(f"  {label}\t{hist[label]}")
    return EXIT_OK


def cmd_labels(args):
    seed = _seed(args)
    cfg = McConfig(seed, args.samples, args.batches, args.threads, args.budget)
    rows, records = [], []
    for n in args.n:
        mean, prob = estimate_good_paths(args.k, args.a, args.x0, n, cfg)
        exact = sp.expected_good_paths(args.k, args.a, args.x0, n)
        rows.append(estimates_to_rows("mean_good_paths", args.k, args.a, args.x0, n, mean,
                                      exact, with_time=args.record_time))
        rows.append(estimates_to_rows("nonempty_prob", args.k, args.a, args.x0, n, prob,
                                      with_time=args.record_time))
        records.append({"n": n, "exact_mean": exact,
                        "mean": json.loads(estimate_to_json(mean, args.record_time)),
                        "nonempty": json.loads(estimate_to_json(prob, args.record_time))})
        z = f"{(mean.mean - exact) / mean.stderr:+.2f}" if mean.stderr > 0 else "n/a"
        print(f"n={n}: mean {mean.mean:.6g} +- {mean.stderr:.2g} (exact {exact:.6g}, "
              f"z={z}); P(nonempty) {prob.mean:.6g} +- {prob.stderr:.2g}")
        if mean.flagged:
            print(f"warning: {mean.truncated} samples hit the node budget at n={n}; "
                  "mean is biased low", file=sys.stderr)
    if args.out is not None:
        if args.out.suffix == ".json":
            doc = {"schemaVersion": sp.SCHEMA_VERSION, "k": args.k, "a": args.a,
                   "x0": args.x0, "seed": seed, "samples": args.samples,
                   "results": records}
            _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            _write(args.out, rows_to_csv(rows, with_time=args.record_time))
    return EXIT_OK


def cmd_classify(args):
    rep = sp.classify(args.k, args.a, N=args.N, tol=args.tol)
    doc = json.dumps(rep.to_json_dict(), indent=2, sort_keys=True) + "\n"
    print(f"k={args.k} a={args.a}: {rep.verdict.capitalize()} "
          f"(lambda_N={rep.lam:.15f}, N={rep.N}, k*lambda_N-1={rep.margin:+.3e})")
    if args.out is not None:
        _write(args.out, doc)
    return EXIT_FAIL if rep.verdict == sp.INDETERMINATE else EXIT_OK


def cmd_verify(args):
    names = SUITES if args.suite == "all" else (args.suite,)
    seed = _seed(args) if "geometry" in names else args.seed
    checks = run_suites(names, seed=seed if seed is not None else 0, splits=args.splits)
    width = max(len(c.name) for c in checks)
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.suite:<12}{c.name:<{width}}  {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_spectral(args):
    if args.table == "lambda":
        rows = []
        for N in args.N or (30, 60, 120, 240):
            eig = sp.dominant_eigen(sp.build_killed_kernel(args.k, args.a, N))
            rows.append((N, repr(eig.lam), repr(args.k * eig.lam), eig.iterations))
        text = _csv(("N", "lambda_N", "k_lambda_N", "iterations"), rows)
    elif args.table == "g":
        rows = [(x, repr(sp.qsd_exact(x)), sp.qsd_fraction(x)) for x in range(4, args.x_max + 1)]
        text = _csv(("x", "g", "g_exact"), rows)
    elif args.table == "f":
        rows = [(x, repr(sp.right_eigen_exact(x))) for x in range(4, args.x_max + 1)]
        text = _csv(("x", "f"), rows)
    else:
        N = args.N[0] if args.N else None
        law = sp.iterate_conditioned(args.k, args.a, args.x0, args.n, N=N)
        rows = [(int(x), repr(float(q))) for x, q in zip(law.states, law.q) if q > 0]
        text = (f"# n={args.n} x0={args.x0} survival={law.survival!r}\n"
                + _csv(("x", "q_n"), rows))
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write(args.out, text)
    return EXIT_OK


COMMANDS = {"lam": cmd_lam, "labels": cmd_labels, "classify": cmd_classify,
            "verify": cmd_verify, "spectral": cmd_spectral}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads = _threads(args, parser)
    _validate(args, parser)
    set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except (sp.ConvergenceError, sp.TruncationError) as exc:
        print(f"lamqsd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except sp.ConsistencyError as exc:
        print(f"lamqsd: check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"lamqsd: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
