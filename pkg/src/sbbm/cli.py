"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``evaluate``, ``census``, ``ingest`` and
``bench``. Tabular output goes to stdout as CSV or JSON (``--format``).
Errors are reported on stderr as a one-line JSON object and a nonzero exit
status. ``SBBM_NUM_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from sbbm import io
from sbbm.bench import TABLES, run_table
from sbbm.evaluation import (clustering_error, membership_error, prob_error, signed_modularity,
                             triad_census)
from sbbm.fitter import FitConfig, fit, select_k_bic
from sbbm.generators import Example1Config, gen_example1, gen_example2, gen_example3
from sbbm.model import population_probabilities

THREADS_ENV = "SBBM_NUM_THREADS"

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": f"{self.prog}: {message}"}), file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _k_range(text):
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 1 <= A <= B, got {text!r}")
    return list(range(lo, hi + 1))


def _window(text):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YEAR:YEAR, got {text!r}") from None
    return lo, hi


def cmd_simulate(args):
    if args.example == 1:
        sample = gen_example1(Example1Config(n=args.n, mu=-2.5 if args.param is None else args.param, seed=args.seed),
                              args.diagonal_policy)
    elif args.example == 2:
        sample = gen_example2(args.n, K=args.k or 4, seed=args.seed, diagonal_policy=args.diagonal_policy)
    else:
        sample = gen_example3(args.n, var_beta=1.0 if args.param is None else args.param, seed=args.seed,
                              diagonal_policy=args.diagonal_policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_edge_list(sample.adjacency, out / "edges.tsv")
    io.write_labels(sample.membership.labels, out / "labels.tsv")
    io.write_matrix(sample.p_plus, out / "p_plus.csv")
    io.write_matrix(sample.p_minus, out / "p_minus.csv")
    m_plus, m_minus = sample.adjacency.edge_counts()
    return [{"n": sample.adjacency.n, "K": sample.membership.K, "positive_edges": m_plus,
             "negative_edges": m_minus, "out": str(out)}]


def _config(args, K):
    return FitConfig(K=K, alpha=args.alpha, t_max=args.t_max, epsilon=args.epsilon, seed=args.seed,
                     diagonal_policy=args.diagonal_policy)


def cmd_fit(args):
    adjacency = io.load_edge_list(args.edges, args.diagonal_policy)
    bic = {}
    if args.k_range:
        best_k, entries = select_k_bic(adjacency, args.k_range, _config(args, args.k_range[0]))
        if entries[best_k].report is None:
            raise CliError("every candidate K failed to fit")
        report = entries[best_k].report
        bic = {str(k): e.bic for k, e in entries.items()}
    else:
        report = fit(adjacency, _config(args, args.k))
    config = {"alpha": args.alpha, "t_max": args.t_max, "epsilon": args.epsilon, "seed": args.seed,
              "k": args.k, "k_range": args.k_range, "edges": str(Path(args.edges).resolve())}
    diagnostics = {"converged": report.converged, "outer_iters": report.outer_iters,
                   "nll_trace": [float(v) for v in report.nll_trace], "messages": list(report.diagnostics)}
    if bic:
        diagnostics["bic"] = bic
    model = io.ModelFile(node_ids=list(adjacency.node_ids), K=report.K, params=report.params,
                         labels=report.membership.labels, nll=report.nll,
                         diagonal_policy=adjacency.diagonal_policy, diagnostics=diagnostics, config=config)
    io.save_model(model, args.out)
    if args.strict and not report.converged:
        raise _NotConverged(f"fit stopped at t_max={args.t_max} without converging")
    return [{"n": adjacency.n, "K": report.K, "nll": report.nll, "converged": report.converged,
             "outer_iters": report.outer_iters, "model": args.out}]


class _NotConverged(Exception):
    pass


def cmd_evaluate(args):
    model = io.load_model(args.model)
    truth = io.align_labels(io.read_labels(args.truth_labels), model.node_ids)
    row = {"clustering_error": clustering_error(model.labels, truth),
           "membership_error": membership_error(model.labels, truth)}
    if (args.truth_pplus is None) != (args.truth_pminus is None):
        raise CliError("--truth-pplus and --truth-pminus go together")
    if args.truth_pplus is not None:
        p_plus, p_minus = population_probabilities(model.params, model.membership)
        t_plus, t_minus = io.read_matrix(args.truth_pplus), io.read_matrix(args.truth_pminus)
        order = _truth_order(model.node_ids, t_plus.shape[0])
        row["prob_error_plus"] = prob_error(p_plus, t_plus[np.ix_(order, order)])
        row["prob_error_minus"] = prob_error(p_minus, t_minus[np.ix_(order, order)])
    edges = args.edges or model.config.get("edges")
    if edges:
        adjacency = io.load_edge_list(edges, model.diagonal_policy)
        if list(adjacency.node_ids) != list(model.node_ids):
            raise CliError("edge list nodes do not match the model")
        row["q_signed"] = signed_modularity(adjacency, model.labels)
    return [row]


def _truth_order(node_ids, size):
    # truth matrices from `simulate` are indexed by integer node id
    try:
        order = np.array([int(v) for v in node_ids])
    except ValueError:
        raise CliError("truth matrices need integer node ids") from None
    if order.min() < 0 or order.max() >= size:
        raise CliError("node ids fall outside the truth matrices")
    return order


def cmd_census(args):
    census = triad_census(io.load_edge_list(args.edges, args.diagonal_policy))
    return [census.as_dict()]


def cmd_ingest(args):
    spec = io.IngestSpec(args.trade, args.sanctions, args.window, args.top_fraction)
    result = io.build_real_network(spec)
    io.write_edge_list(result.adjacency, args.out)
    return [{**result.counts, "trading_pairs": result.n_trading_pairs, "threshold_rank": result.threshold_rank,
             "threshold_value": result.threshold_value, "out": args.out}]


def cmd_bench(args):
    def progress(scenario, results):
        print(f"# example {scenario.example} n={scenario.n} param={scenario.param:g}: "
              f"{len(results)} replications done", file=sys.stderr, flush=True)

    return run_table(args.table, reps=args.reps, seed=args.seed, n_values=args.n,
                     workers=args.workers, progress=None if args.quiet else progress)


def build_parser():
    parser = _Parser(prog="sbbm", description="Signed block beta-model toolkit")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
        p.add_argument("--diagonal-policy", choices=("exclude", "include"), default="exclude")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="draw a synthetic network with truth files")
    common(p)
    p.add_argument("--example", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, help="communities (example 2)")
    p.add_argument("--param", type=float, help="mu (example 1) or sigma^2 (example 3)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model to an edge list")
    common(p)
    p.add_argument("--edges", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int)
    group.add_argument("--k-range", type=_k_range, help="select K by BIC over A..B")
    p.add_argument("--alpha", type=float, default=1e-6)
    p.add_argument("--t-max", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--strict", action="store_true", help="exit nonzero if the fit did not converge")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score a fitted model against truth")
    common(p, seed=False)
    p.add_argument("--model", required=True)
    p.add_argument("--truth-labels", required=True)
    p.add_argument("--truth-pplus")
    p.add_argument("--truth-pminus")
    p.add_argument("--edges", help="edge list for modularity (defaults to the one used for fitting)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("census", help="triad census of an edge list")
    common(p, seed=False)
    p.add_argument("--edges", required=True)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("ingest", help="build the trade/sanctions network")
    common(p, seed=False)
    p.add_argument("--trade", required=True)
    p.add_argument("--sanctions", required=True)
    p.add_argument("--window", type=_window, default=(2015, 2023))
    p.add_argument("--top-fraction", type=float, default=1.0 / 30.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bench", help="rerun a simulation table")
    common(p)
    p.add_argument("--table", type=int, choices=sorted(TABLES), required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n", type=int, nargs="+", help="restrict to these network sizes")
    p.add_argument("--workers", type=int, default=1, help="parallel replication processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _limit_threads():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(value))


def _error(kind, message, code):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _limit_threads()
    try:
        rows = args.func(args)
    except _NotConverged as exc:
        return _error("NotConverged", str(exc), EXIT_NOT_CONVERGED)
    except (CliError, ValueError, OSError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_ERROR)
    io.write_table(rows, args.format, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
