"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 estimation infeasible
(item graph not ergodic), 3 undefined metric.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .benchmark import METHODS as BENCH_METHODS
from .benchmark import parse_grid, run_scaling_benchmark
from .data import FORMATS, GroundTruth, generate_synthetic, load_responses, save_responses
from .errors import (
    ContractError,
    ConvergenceError,
    DegenerateItemError,
    NotErgodicError,
    ParseError,
    UndefinedMetricError,
)
from .estimator import METHODS, EstimatorConfig, dumps_estimate, spectral_estimate
from .metrics import evaluate_estimate, reference_ranking

log = logging.getLogger("spectral_rasch")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_METRIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_estimator_flags(p):
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--nu", type=float, default=1.0, help="regularization added to co-assigned pairs")
    p.add_argument("--method", choices=METHODS, default="accelerated")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--d-override", type=float, default=None, help="common normalizer (original method only)")


def _config(args) -> EstimatorConfig:
    return EstimatorConfig(
        nu=args.nu, method=args.method, tol=args.tol, max_iters=args.max_iters, d_override=args.d_override
    )


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectral-rasch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate item parameters from a response file")
    p.add_argument("--input", required=True)
    _add_estimator_flags(p)
    p.add_argument("--out", default="-", help="estimate CSV (default stdout)")

    p = sub.add_parser("simulate", help="sample a synthetic response matrix")
    p.add_argument("--n", type=int, required=True, help="number of users")
    p.add_argument("--m", type=int, required=True, help="number of items")
    p.add_argument("--p", type=float, default=1.0, help="probability a user is shown an item")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--beta-spec",
        default="grid",
        help="'grid' for evenly spaced on [-1,1], or comma-separated values (centered)",
    )
    p.add_argument("--theta-range", type=float, default=1.0, help="abilities iid uniform on [-r, r]")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--out", required=True, help="response file")
    p.add_argument("--truth-out", default=None, help="ground-truth JSON (default: <out>.truth.json)")

    p = sub.add_parser("benchmark", help="Monte-Carlo error scaling benchmark")
    p.add_argument("--grid", required=True, help="e.g. 'n=200,800,3200;m=10;p=1.0'")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="spectral", help=f"comma-separated from {sorted(BENCH_METHODS)}")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output stem; writes <stem>.csv and <stem>.json")

    p = sub.add_parser("evaluate", help="fit on a training file and score a test file")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_estimator_flags(p)
    p.add_argument("--topk", type=_int_list, default=[], help="comma-separated K values")
    p.add_argument("--ref-min-count", type=int, default=0)
    p.add_argument("--ref-max-mean", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output stem; writes <stem>.csv and <stem>.json")
    return parser


def _stem(path: str) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".json") else p


def _write_text(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_estimate(args) -> int:
    X = load_responses(args.input, args.format)
    est = spectral_estimate(X, _config(args))
    st = est.stationary
    print(
        f"items={X.n_items} users={X.n_users} method={est.method} ergodic={est.connectivity.is_ergodic} "
        f"iterations={st.iterations} residual={st.residual:.3g} lazy={st.lazy}",
        file=sys.stderr,
    )
    _write_text(args.out, dumps_estimate(est))
    return EXIT_OK


def _parse_beta(spec: str, m: int) -> np.ndarray:
    if spec == "grid":
        return np.linspace(-1.0, 1.0, m)
    try:
        beta = np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise ContractError(f"bad --beta-spec {spec!r}") from None
    if beta.size != m:
        raise ContractError(f"--beta-spec has {beta.size} values for m={m}")
    return beta - beta.mean()


def cmd_simulate(args) -> int:
    if not 0.0 < args.p <= 1.0:
        raise ContractError(f"--p must be in (0, 1], got {args.p}")
    if args.n < 1 or args.m < 2:
        raise ContractError("need --n >= 1 and --m >= 2")
    beta = _parse_beta(args.beta_spec, args.m)
    ss = np.random.SeedSequence(args.seed)
    theta_ss, data_ss = ss.spawn(2)
    theta = np.random.default_rng(theta_ss).uniform(-args.theta_range, args.theta_range, size=args.n)
    truth = GroundTruth(theta, beta, args.p)
    X = generate_synthetic(truth, args.n, int(data_ss.generate_state(1, dtype=np.uint64)[0]))
    save_responses(X, args.out, args.format)
    truth_out = args.truth_out or f"{args.out}.truth.json"
    Path(truth_out).write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {args.out} and {truth_out}", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    grid = parse_grid(args.grid)
    methods = [s.strip() for s in args.methods.split(",") if s.strip()]
    unknown = [s for s in methods if s not in BENCH_METHODS]
    if unknown:
        raise ContractError(f"unknown method(s) {unknown}; valid methods: {', '.join(sorted(BENCH_METHODS))}")
    report = run_scaling_benchmark(grid, args.trials, args.seed, methods, nu=args.nu, workers=args.workers)
    stem = _stem(args.out)
    stem.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    stem.with_suffix(".json").write_text(report.to_json() + "\n", encoding="utf-8")
    for s in report.slopes:
        print(f"{s['method']}: slope of median l2 vs {s['vary']} = {s['slope']:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    train = load_responses(args.train, args.format)
    test = load_responses(args.test, args.format)
    if train.item_ids != test.item_ids:
        raise ContractError("train and test files have different item columns")
    est = spectral_estimate(train, _config(args))
    reference = None
    if args.topk:
        reference = reference_ranking(train, args.ref_min_count, args.ref_max_mean)
    report = evaluate_estimate(test, est.beta, args.topk, reference, seed=args.seed)
    stem = _stem(args.out)
    stem.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    stem.with_suffix(".json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"auc={report.auc:.4f} avg_loglik={report.avg_loglik:.4f}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotErgodicError, DegenerateItemError, ConvergenceError) as exc:
        print(f"estimation infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UndefinedMetricError as exc:
        print(f"undefined metric: {exc}", file=sys.stderr)
        return EXIT_METRIC


if __name__ == "__main__":
    sys.exit(main())
