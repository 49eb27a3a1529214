"""Experiment harness: seeded, resumable benchmark runs over synthetic
exchange graphs, persisted as CSV plus a JSON run manifest.

Every run is fully determined by its config (which is serialized into the
manifest), so re-running a manifest reproduces byte-identical CSV output.
Wall-clock timings are therefore written to a separate timings.json and kept
out of the byte-compared artifacts.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from .graph import ExchangeGraph, enumerate_structures, generate_random_graph
from .matching import FAILURE_AWARE, MAX_WEIGHT
from .selection import (
    EvalConfig,
    LegalEdgeSets,
    MctsConfig,
    ObjectiveEvaluator,
    exhaustive_opt,
    greedy_next_edge,
    greedy_single_stage,
    mcts_next_edge,
    mcts_single_stage,
)
from .uncertainty import (
    PHASE_REALIZATIONS,
    DistributionSpec,
    make_kpd,
    make_simple,
    scenario_uniforms,
)

OUTPUT_DIR_ENV = "PRESCREEN_OUTPUT_DIR"

SINGLE_STAGE_METHODS = ("none", "random", "greedy", "mcts", "exhaustive", "fail_aware")
MULTI_STAGE_METHODS = ("random", "greedy", "mcts")

SINGLE_STAGE_COLUMNS = [
    "graph_id",
    "method",
    "gamma",
    "objective_value",
    "delta_max",
    "best_seen_value",
    "oracle_calls",
    "queried_edges",
    "note",
]
MULTI_STAGE_COLUMNS = [
    "graph_id",
    "method",
    "gamma",
    "realization",
    "final_value",
    "delta_max",
    "oracle_calls",
    "queried_edges",
]
SUMMARY_COLUMNS = ["method", "gamma", "p10", "p50", "p90", "count"]
BOOTSTRAP_COLUMNS = [
    "graph_id",
    "gamma",
    "query_set_size",
    "sample_size",
    "normalized_std",
]
OPT_GAP_COLUMNS = [
    "graph_id",
    "gamma",
    "v_opt",
    "v_greedy",
    "pct_opt",
    "matched",
]


@dataclass
class ExperimentConfig:
    """Everything that determines a run; serialized into every output."""

    graph_count: int = 10
    graph_n: int = 50
    graph_p: float = 0.01
    graph_seed: int = 0
    graph_files: tuple[str, ...] = ()
    distribution: str = "simple"  # simple | kpd
    dist_seed: int = 0
    high_risk_fraction: float = 0.0
    policy: str = MAX_WEIGHT
    methods: tuple[str, ...] = ("none", "random", "greedy")
    budgets: tuple[int, ...] = (3,)
    samples: int = 1000
    exact_cap: int = 10
    max_cycle_len: int = 3
    max_chain_len: int = 3
    mcts_iterations: int = 1000
    mcts_lookahead: int = 2
    mcts_seconds: float | None = None
    exhaustive_node_cap: int = 200_000
    realizations: int = 10
    master_seed: int = 0
    sample_sizes: tuple[int, ...] = (10, 30, 50, 100, 1000)
    replications: int = 200

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs = dict(data)
        for key in ("graph_files", "methods", "budgets", "sample_sizes"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class MethodResult:
    """One harness row; delta_max is relative to the run's own no-query
    baseline under the max-weight policy."""

    graph_id: str
    method: str
    gamma: int
    value: float
    delta_max: float
    oracle_calls: int
    runtime: float
    queried_edges: tuple[int, ...] = ()
    best_seen_value: float | None = None
    note: str = ""


@dataclass
class _Instance:
    graph_id: str
    graph: ExchangeGraph
    structures: list
    spec: DistributionSpec


def compute_pct_opt(v_opt: float, v_method: float) -> float:
    """Optimality gap in percent; only defined for strictly positive optima."""
    if v_opt <= 0:
        raise ValueError("pct_opt requires a strictly positive optimal value")
    return 100.0 * (v_opt - v_method) / v_opt


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("no values")
    rank = max(1, int(np.ceil(pct / 100.0 * len(ordered))))
    return float(ordered[rank - 1])


def _make_distribution(cfg: ExperimentConfig, graph: ExchangeGraph, index: int) -> DistributionSpec:
    if cfg.distribution == "simple":
        return make_simple(graph)
    if cfg.distribution == "kpd":
        rng = np.random.default_rng([cfg.dist_seed, index])
        m = graph.num_edges
        n_high = int(round(cfg.high_risk_fraction * m))
        high_risk = set(rng.choice(m, size=n_high, replace=False).tolist()) if n_high else set()
        return make_kpd(graph, high_risk, seed=int(rng.integers(2**31)))
    raise ValueError(f"unknown distribution {cfg.distribution!r}")


def prepare_instances(cfg: ExperimentConfig) -> list[_Instance]:
    """Materialize the run's graph instances.

    Generated graphs with no cycle or chain at all are skipped (the clearing
    policy is constant there and queries cannot change anything); generator
    seeds are scanned in order until graph_count non-trivial graphs exist, so
    the instance list is deterministic.
    """
    instances: list[_Instance] = []
    if cfg.graph_files:
        for path in cfg.graph_files:
            graph = ExchangeGraph.load(path)
            structures = enumerate_structures(graph, cfg.max_cycle_len, cfg.max_chain_len)
            name = os.path.splitext(os.path.basename(path))[0]
            spec = _make_distribution(cfg, graph, len(instances))
            instances.append(_Instance(name, graph, structures, spec))
        return instances

    seed = cfg.graph_seed
    attempts = 0
    while len(instances) < cfg.graph_count:
        graph = generate_random_graph(cfg.graph_n, cfg.graph_p, seed)
        structures = enumerate_structures(graph, cfg.max_cycle_len, cfg.max_chain_len)
        if structures:
            spec = _make_distribution(cfg, graph, len(instances))
            instances.append(_Instance(f"er-n{cfg.graph_n}-s{seed}", graph, structures, spec))
        seed += 1
        attempts += 1
        if attempts > 100 * cfg.graph_count + 1000:
            raise RuntimeError("could not find enough non-trivial graphs")
    return instances


def _evaluator(cfg: ExperimentConfig, inst: _Instance, policy: str) -> ObjectiveEvaluator:
    return ObjectiveEvaluator(
        inst.graph,
        inst.structures,
        inst.spec,
        policy,
        EvalConfig(exact_cap=cfg.exact_cap, samples=cfg.samples, seed=cfg.master_seed),
    )


def _mcts_config(cfg: ExperimentConfig) -> MctsConfig:
    if cfg.mcts_seconds is not None:
        return MctsConfig(
            lookahead=cfg.mcts_lookahead,
            iterations_per_level=None,
            seconds_per_level=cfg.mcts_seconds,
            seed=cfg.master_seed,
        )
    return MctsConfig(
        lookahead=cfg.mcts_lookahead,
        iterations_per_level=cfg.mcts_iterations,
        seed=cfg.master_seed,
    )


def _random_legal_set(legal: LegalEdgeSets, gamma: int, rng) -> frozenset:
    chosen: frozenset = frozenset()
    order = list(sorted(legal.ground))
    rng.shuffle(order)
    for e in order:
        if len(chosen) >= gamma:
            break
        if legal.admits(chosen | {e}):
            chosen = chosen | {e}
    return chosen


def run_single_stage(cfg: ExperimentConfig) -> list[MethodResult]:
    """Benchmark single-stage selection methods on every instance x budget.

    Methods: none (the no-query baseline), random (a uniform legal set),
    greedy, mcts, exhaustive (when the legal family fits the node cap), and
    fail_aware (no queries, matched by the failure-aware policy instead).
    """
    results: list[MethodResult] = []
    for idx, inst in enumerate(prepare_instances(cfg)):
        baseline_ev = _evaluator(cfg, inst, MAX_WEIGHT)
        baseline = baseline_ev.value(())
        for gamma in cfg.budgets:
            legal = LegalEdgeSets(inst.graph, budget=gamma)
            for method in cfg.methods:
                results.append(
                    _run_single_method(cfg, inst, idx, method, gamma, legal, baseline)
                )
    return results


def _run_single_method(cfg, inst, graph_index, method, gamma, legal, baseline) -> MethodResult:
    policy = cfg.policy if method != "fail_aware" else FAILURE_AWARE
    evaluator = _evaluator(cfg, inst, policy)
    start = time.perf_counter()
    note = ""
    best_seen = None
    queried: tuple[int, ...] = ()
    if method == "none":
        value = evaluator.value(())
    elif method == "fail_aware":
        # the failure-aware policy's no-query value, reported against the
        # max-weight baseline
        value = evaluator.value(())
    elif method == "random":
        rng = np.random.default_rng([cfg.master_seed, graph_index, gamma, 1])
        chosen = _random_legal_set(legal, gamma, rng)
        queried = tuple(sorted(chosen))
        value = evaluator.value(chosen)
    elif method == "greedy":
        res = greedy_single_stage(evaluator, legal)
        queried, value, best_seen = res.query_set, res.value, res.best_value
    elif method == "mcts":
        res = mcts_single_stage(evaluator, legal, _mcts_config(cfg))
        queried, value = res.query_set, res.value
    elif method == "exhaustive":
        res = exhaustive_opt(evaluator, legal, node_cap=cfg.exhaustive_node_cap)
        queried, value = res.query_set, res.value
    else:
        raise ValueError(f"unknown method {method!r}")
    runtime = time.perf_counter() - start
    return MethodResult(
        graph_id=inst.graph_id,
        method=method,
        gamma=gamma,
        value=value,
        delta_max=(value - baseline) / baseline,
        oracle_calls=evaluator.oracle_calls,
        runtime=runtime,
        queried_edges=queried,
        best_seen_value=best_seen,
        note=note,
    )


def run_multi_stage(cfg: ExperimentConfig) -> list[MethodResult]:
    """Simulate the sequential query loop (recommend, observe, repeat up to
    the budget) over seeded rejection realizations; the realized responses
    are shared across methods via common random numbers."""
    results: list[MethodResult] = []
    for idx, inst in enumerate(prepare_instances(cfg)):
        baseline_ev = _evaluator(cfg, inst, MAX_WEIGHT)
        baseline = baseline_ev.value(())
        for gamma in cfg.budgets:
            legal = LegalEdgeSets(inst.graph, budget=gamma)
            for method in cfg.methods:
                if method not in MULTI_STAGE_METHODS:
                    continue
                results.extend(
                    _run_multi_method(cfg, inst, idx, method, gamma, legal, baseline)
                )
    return results


def _run_multi_method(cfg, inst, graph_index, method, gamma, legal, baseline):
    evaluator = _evaluator(cfg, inst, cfg.policy)
    rows: list[MethodResult] = []
    finals = []
    start = time.perf_counter()
    for realization in range(cfg.realizations):
        responses = scenario_uniforms(
            cfg.master_seed,
            PHASE_REALIZATIONS,
            graph_index * 100_003 + realization,
            inst.graph.num_edges,
        )
        rng = np.random.default_rng([cfg.master_seed, graph_index, realization, 2])
        calls_before = evaluator.oracle_calls
        queried: frozenset = frozenset()
        rejected: frozenset = frozenset()
        for _ in range(gamma):
            edge = _next_edge(cfg, method, evaluator, legal, queried, rejected, rng)
            if edge is None:
                break
            queried = queried | {edge}
            if responses[edge] < float(inst.spec.p_reject[edge]):
                rejected = rejected | {edge}
        final = evaluator.terminal_value(queried, rejected)
        finals.append(final)
        rows.append(
            MethodResult(
                graph_id=inst.graph_id,
                method=method,
                gamma=gamma,
                value=final,
                delta_max=(final - baseline) / baseline,
                oracle_calls=evaluator.oracle_calls - calls_before,
                runtime=0.0,
                queried_edges=tuple(sorted(queried)),
                note=str(realization),
            )
        )
    mean_final = float(np.mean(finals)) if finals else baseline
    rows.append(
        MethodResult(
            graph_id=inst.graph_id,
            method=method,
            gamma=gamma,
            value=mean_final,
            delta_max=(mean_final - baseline) / baseline,
            oracle_calls=evaluator.oracle_calls,
            runtime=time.perf_counter() - start,
            queried_edges=(),
            note="mean",
        )
    )
    return rows


def _next_edge(cfg, method, evaluator, legal, queried, rejected, rng):
    if method == "greedy":
        return greedy_next_edge(evaluator, legal, queried, rejected)
    if method == "mcts":
        return mcts_next_edge(evaluator, legal, queried, rejected, _mcts_config(cfg))
    if method == "random":
        exts = legal.extensions(queried)
        if not exts:
            return None
        return int(exts[int(rng.integers(len(exts)))])
    raise ValueError(f"unknown multi-stage method {method!r}")


def bootstrap_objective_std(
    evaluator: ObjectiveEvaluator,
    edge_ids,
    sample_sizes,
    replications: int,
    seed: int,
) -> list[dict]:
    """Bootstrap the sampled objective estimator of one query set.

    Draws the per-scenario value pool once, then for each N resamples N
    values with replacement `replications` times and reports the standard
    deviation of the bootstrap means, normalized by the overall mean.
    """
    pool = evaluator.scenario_values(edge_ids)
    overall_mean = float(np.mean(pool))
    rng = np.random.default_rng(seed)
    rows = []
    for n in sample_sizes:
        means = np.array(
            [np.mean(rng.choice(pool, size=n, replace=True)) for _ in range(replications)]
        )
        std = float(np.std(means))
        rows.append(
            {
                "sample_size": int(n),
                "normalized_std": std / overall_mean if overall_mean != 0 else 0.0,
            }
        )
    return rows


def run_bootstrap(cfg: ExperimentConfig) -> list[dict]:
    """Greedy-select a query set per instance x budget, then bootstrap the
    sampled estimator of its objective."""
    rows: list[dict] = []
    for inst in prepare_instances(cfg):
        for gamma in cfg.budgets:
            legal = LegalEdgeSets(inst.graph, budget=gamma)
            evaluator = _evaluator(cfg, inst, cfg.policy)
            res = greedy_single_stage(evaluator, legal)
            for stat in bootstrap_objective_std(
                evaluator,
                res.query_set,
                cfg.sample_sizes,
                cfg.replications,
                seed=cfg.master_seed,
            ):
                rows.append(
                    {
                        "graph_id": inst.graph_id,
                        "gamma": gamma,
                        "query_set_size": len(res.query_set),
                        **stat,
                    }
                )
    return rows


def run_opt_gap(cfg: ExperimentConfig) -> list[dict]:
    """Greedy versus exhaustive search: per-instance optimality gap."""
    rows: list[dict] = []
    for inst in prepare_instances(cfg):
        for gamma in cfg.budgets:
            legal = LegalEdgeSets(inst.graph, budget=gamma)
            ev_opt = _evaluator(cfg, inst, cfg.policy)
            opt = exhaustive_opt(ev_opt, legal, node_cap=cfg.exhaustive_node_cap)
            ev_greedy = _evaluator(cfg, inst, cfg.policy)
            greedy = greedy_single_stage(ev_greedy, legal)
            gap = compute_pct_opt(opt.value, greedy.value)
            rows.append(
                {
                    "graph_id": inst.graph_id,
                    "gamma": gamma,
                    "v_opt": opt.value,
                    "v_greedy": greedy.value,
                    "pct_opt": gap,
                    "matched": int(gap <= 1e-9),
                }
            )
    return rows


# -- persistence -------------------------------------------------------------


def resolve_output_dir(out_dir: str | None) -> str:
    out = os.environ.get(OUTPUT_DIR_ENV) or out_dir
    if not out:
        raise ValueError(f"no output directory given (flag or ${OUTPUT_DIR_ENV})")
    os.makedirs(out, exist_ok=True)
    return out


def write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(row.get(k)) for k in columns})


def _format_cell(value):
    if isinstance(value, float):
        return repr(float(value))  # numpy scalars print as plain floats
    if isinstance(value, (tuple, list)):
        return ";".join(str(v) for v in value)
    if value is None:
        return ""
    return value


def method_result_rows(results: list[MethodResult], multi_stage: bool) -> list[dict]:
    rows = []
    for r in results:
        row = {
            "graph_id": r.graph_id,
            "method": r.method,
            "gamma": r.gamma,
            "objective_value": r.value,
            "final_value": r.value,
            "delta_max": r.delta_max,
            "best_seen_value": r.best_seen_value,
            "oracle_calls": r.oracle_calls,
            "queried_edges": r.queried_edges,
            "note": r.note,
            "realization": r.note if multi_stage else "",
        }
        rows.append(row)
    return rows


def summarize(results: list[MethodResult], aggregate_only: bool = False) -> list[dict]:
    """Per (method, gamma) nearest-rank percentile summary of delta_max."""
    grouped: dict[tuple, list[float]] = {}
    for r in results:
        if aggregate_only and r.note != "mean":
            continue
        grouped.setdefault((r.method, r.gamma), []).append(r.delta_max)
    rows = []
    for (method, gamma), deltas in sorted(grouped.items()):
        rows.append(
            {
                "method": method,
                "gamma": gamma,
                "p10": nearest_rank_percentile(deltas, 10),
                "p50": nearest_rank_percentile(deltas, 50),
                "p90": nearest_rank_percentile(deltas, 90),
                "count": len(deltas),
            }
        )
    return rows


def write_run_outputs(
    out_dir: str,
    cfg: ExperimentConfig,
    command: str,
    rows: list[dict],
    columns: list[str],
    summary_rows: list[dict] | None = None,
    timings: dict | None = None,
) -> dict:
    """Write results.csv, manifest.json, optional summary.csv, timings.json."""
    paths = {}
    results_path = os.path.join(out_dir, "results.csv")
    write_csv(results_path, columns, rows)
    paths["results"] = results_path
    if summary_rows is not None:
        summary_path = os.path.join(out_dir, "summary.csv")
        write_csv(summary_path, SUMMARY_COLUMNS, summary_rows)
        paths["summary"] = summary_path
    manifest = {"command": command, "config": cfg.to_json_dict()}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    paths["manifest"] = manifest_path
    if timings is not None:
        timings_path = os.path.join(out_dir, "timings.json")
        with open(timings_path, "w") as f:
            json.dump(timings, f, indent=2, sort_keys=True)
            f.write("\n")
        paths["timings"] = timings_path
    return paths
