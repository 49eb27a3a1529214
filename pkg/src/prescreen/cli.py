"""Command-line harness: graph generation and the benchmark experiments.

Subcommands: gen-graph, single-stage, multi-stage, bootstrap, opt-gap. Every
run writes results.csv and manifest.json (deterministic, byte-identical on
re-run) plus timings.json (wall clock, excluded from reproducibility checks)
into the output directory, which the PRESCREEN_OUTPUT_DIR environment
variable overrides.
"""

from __future__ import annotations

import argparse
import sys
import time

from .experiments import (
    BOOTSTRAP_COLUMNS,
    MULTI_STAGE_COLUMNS,
    OPT_GAP_COLUMNS,
    SINGLE_STAGE_COLUMNS,
    ExperimentConfig,
    method_result_rows,
    resolve_output_dir,
    run_bootstrap,
    run_multi_stage,
    run_opt_gap,
    run_single_stage,
    summarize,
    write_run_outputs,
)
from .graph import generate_random_graph
from .matching import FAILURE_AWARE, MAX_WEIGHT


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--graph-count", type=int, default=10)
    parser.add_argument("--graph-n", type=int, default=50)
    parser.add_argument("--graph-p", type=float, default=0.01)
    parser.add_argument("--graph-seed", type=int, default=0)
    parser.add_argument(
        "--graph-file", action="append", default=[], dest="graph_files",
        help="use this graph JSON file instead of generating (repeatable)",
    )
    parser.add_argument("--distribution", choices=["simple", "kpd"], default="simple")
    parser.add_argument("--dist-seed", type=int, default=0)
    parser.add_argument("--high-risk-fraction", type=float, default=0.0)
    parser.add_argument("--policy", choices=[MAX_WEIGHT, FAILURE_AWARE], default=MAX_WEIGHT)
    parser.add_argument(
        "--budgets", type=int, nargs="+", default=[3], help="edge budgets to sweep"
    )
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--exact-cap", type=int, default=10)
    parser.add_argument("--max-cycle-len", type=int, default=3)
    parser.add_argument("--max-chain-len", type=int, default=3)
    parser.add_argument("--mcts-iterations", type=int, default=1000)
    parser.add_argument("--mcts-lookahead", type=int, default=2)
    parser.add_argument(
        "--mcts-seconds", type=float, default=None,
        help="wall-clock budget per level (replaces the iteration budget)",
    )
    parser.add_argument("--exhaustive-node-cap", type=int, default=200_000)
    parser.add_argument("--realizations", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0, dest="master_seed")
    parser.add_argument("--sample-sizes", type=int, nargs="+", default=[10, 30, 50, 100, 1000])
    parser.add_argument("--replications", type=int, default=200)
    parser.add_argument("--out-dir", default=None)


def _config_from_args(args, methods=None) -> ExperimentConfig:
    return ExperimentConfig(
        graph_count=args.graph_count,
        graph_n=args.graph_n,
        graph_p=args.graph_p,
        graph_seed=args.graph_seed,
        graph_files=tuple(args.graph_files),
        distribution=args.distribution,
        dist_seed=args.dist_seed,
        high_risk_fraction=args.high_risk_fraction,
        policy=args.policy,
        methods=tuple(methods if methods is not None else args.methods),
        budgets=tuple(args.budgets),
        samples=args.samples,
        exact_cap=args.exact_cap,
        max_cycle_len=args.max_cycle_len,
        max_chain_len=args.max_chain_len,
        mcts_iterations=args.mcts_iterations,
        mcts_lookahead=args.mcts_lookahead,
        mcts_seconds=args.mcts_seconds,
        exhaustive_node_cap=args.exhaustive_node_cap,
        realizations=args.realizations,
        master_seed=args.master_seed,
        sample_sizes=tuple(args.sample_sizes),
        replications=args.replications,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prescreen",
        description="edge pre-screening experiments for kidney exchange clearing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-graph", help="generate a random exchange graph JSON file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=float, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    single = sub.add_parser("single-stage", help="benchmark single-stage selection methods")
    _add_config_args(single)
    single.add_argument(
        "--methods", nargs="+",
        default=["none", "random", "greedy"],
        choices=["none", "random", "greedy", "mcts", "exhaustive", "fail_aware"],
    )

    multi = sub.add_parser("multi-stage", help="simulate sequential querying with feedback")
    _add_config_args(multi)
    multi.add_argument(
        "--methods", nargs="+", default=["random", "greedy"],
        choices=["random", "greedy", "mcts"],
    )

    boot = sub.add_parser("bootstrap", help="bootstrap variance of the sampled objective")
    _add_config_args(boot)

    gap = sub.add_parser("opt-gap", help="greedy vs exhaustive optimality gap")
    _add_config_args(gap)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "gen-graph":
        graph = generate_random_graph(args.n, args.p, args.seed)
        graph.save(args.out)
        print(f"wrote {args.out}: {graph.num_vertices} vertices, "
              f"{graph.num_edges} edges, {len(graph.ndd_ids)} ndds")
        return 0

    out_dir = resolve_output_dir(args.out_dir)
    started = time.perf_counter()

    if args.command == "single-stage":
        cfg = _config_from_args(args)
        results = run_single_stage(cfg)
        rows = method_result_rows(results, multi_stage=False)
        summary = summarize(results)
        timings = {"total_seconds": time.perf_counter() - started}
        paths = write_run_outputs(
            out_dir, cfg, "single-stage", rows, SINGLE_STAGE_COLUMNS, summary, timings
        )
    elif args.command == "multi-stage":
        cfg = _config_from_args(args)
        results = run_multi_stage(cfg)
        rows = method_result_rows(results, multi_stage=True)
        summary = summarize(results, aggregate_only=True)
        timings = {"total_seconds": time.perf_counter() - started}
        paths = write_run_outputs(
            out_dir, cfg, "multi-stage", rows, MULTI_STAGE_COLUMNS, summary, timings
        )
    elif args.command == "bootstrap":
        cfg = _config_from_args(args, methods=("greedy",))
        rows = run_bootstrap(cfg)
        timings = {"total_seconds": time.perf_counter() - started}
        paths = write_run_outputs(
            out_dir, cfg, "bootstrap", rows, BOOTSTRAP_COLUMNS, None, timings
        )
    elif args.command == "opt-gap":
        cfg = _config_from_args(args, methods=("greedy", "exhaustive"))
        rows = run_opt_gap(cfg)
        timings = {"total_seconds": time.perf_counter() - started}
        paths = write_run_outputs(
            out_dir, cfg, "opt-gap", rows, OPT_GAP_COLUMNS, None, timings
        )
    else:  # pragma: no cover - argparse enforces the choices
        raise SystemExit(2)

    print(f"wrote {paths['results']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
