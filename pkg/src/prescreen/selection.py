"""Edge-query selection: the objective, legal query sets, and the search
algorithms (exhaustive, greedy, and UCT tree search) in single-stage and
multi-stage form.

The single-stage objective of a query set q is the expected final matching
weight: expectation over rejection scenarios of the expected post-match
weight of the matching the fixed policy produces for that scenario. Small
query sets are evaluated exactly by enumerating all rejection patterns;
larger ones by sampling with common random numbers, so every method compared
on an instance sees identical scenario draws.

All searches are deterministic given their configuration and seeds. Time
budgets exist for parity with long offline runs; tests use iteration budgets.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .graph import ExchangeGraph, enumerate_structures
from .matching import (
    MAX_WEIGHT,
    POLICIES,
    Matching,
    StructureTable,
    _expected_weight_from_survival,
    _make_matching,
    survival_probs,
)
from .uncertainty import PHASE_REJECTIONS, DistributionSpec, scenario_uniforms


@dataclass(frozen=True)
class EvalConfig:
    """How the objective is evaluated: exact enumeration below exact_cap
    queried edges, otherwise `samples` sampled scenarios seeded by `seed`."""

    exact_cap: int = 10
    samples: int = 1000
    seed: int = 0


class LegalEdgeSets:
    """Family of query sets the decision-maker may issue.

    Supports an edge budget (at most `budget` edges), an optional per-vertex
    cap (at most `per_vertex_cap` queried edges touching any one vertex), and
    an optional restricted ground set; membership is downward closed, so any
    legal set is reachable by adding one edge at a time.
    """

    def __init__(self, graph: ExchangeGraph, budget=None, per_vertex_cap=None, ground=None):
        self.num_edges = graph.num_edges
        self.budget = budget
        self.per_vertex_cap = per_vertex_cap
        self.ground = frozenset(range(graph.num_edges) if ground is None else ground)
        self._endpoints = {e.id: (e.source, e.target) for e in graph.edges}

    def admits(self, edge_ids) -> bool:
        ids = set(edge_ids)
        if not ids <= self.ground:
            return False
        if self.budget is not None and len(ids) > self.budget:
            return False
        if self.per_vertex_cap is not None:
            counts: dict[int, int] = {}
            for e in ids:
                for v in self._endpoints[e]:
                    counts[v] = counts.get(v, 0) + 1
                    if counts[v] > self.per_vertex_cap:
                        return False
        return True

    def extensions(self, q) -> list[int]:
        """Edge ids whose addition keeps q legal, in ascending order."""
        q = frozenset(q)
        return [e for e in sorted(self.ground - q) if self.admits(q | {e})]

    def max_size(self) -> int:
        limit = len(self.ground)
        if self.budget is not None:
            limit = min(limit, self.budget)
        return limit


def children(q, legal: LegalEdgeSets) -> list[frozenset]:
    """All legal supersets of q with exactly one more edge, ascending."""
    q = frozenset(q)
    return [q | {e} for e in legal.extensions(q)]


class ObjectiveEvaluator:
    """Evaluates the edge-query objective and the clearing policy, with
    memoization and an oracle-call counter.

    One logical oracle call is one application of the clearing policy to a
    rejection scenario; memoized re-evaluations of an identical (q, r) or an
    identical query set are free and are not re-counted (the evaluation is
    deterministic, so nothing new is computed).
    """

    def __init__(
        self,
        graph: ExchangeGraph,
        structures,
        spec: DistributionSpec,
        policy: str,
        eval_cfg: EvalConfig | None = None,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.graph = graph
        self.structures = list(structures)
        self.spec = spec
        self.policy = policy
        self.eval_cfg = eval_cfg or EvalConfig()
        self.table = StructureTable(self.structures)
        base_survival = spec.p_success_unqueried
        self._base_expected = self.table.expected_values(base_survival)
        self.oracle_calls = 0
        self._value_cache: dict[frozenset, float] = {}
        self._terminal_cache: dict[tuple, float] = {}
        self._select_cache: dict = {}
        self._uniforms: np.ndarray | None = None

    # -- scenario machinery -------------------------------------------------

    def _select(self, queried: frozenset, rejected: frozenset):
        """Policy's chosen structure indices for one scenario (cached)."""
        key = rejected if self.policy == MAX_WEIGHT else (queried, rejected)
        hit = self._select_cache.get(key)
        if hit is not None:
            return hit
        if self.policy == MAX_WEIGHT:
            values = self.table.f_values(rejected)
        else:
            survival = survival_probs(self.spec, queried, rejected)
            values = self.table.expected_values(
                survival,
                affected=self.table.affected_by(queried),
                base=self._base_expected,
            )
        selected, _ = self.table.solve_packing(values)
        self._select_cache[key] = selected
        return selected

    def _scenario_value(self, queried: frozenset, rejected: frozenset) -> float:
        """W(M(r); q, r) for one rejection scenario."""
        self.oracle_calls += 1
        selected = self._select(queried, rejected)
        affected = self.table.affected_by(queried)
        survival = None
        total = 0.0
        for i in selected:
            if i in affected:
                if survival is None:
                    survival = survival_probs(self.spec, queried, rejected)
                total += _expected_weight_from_survival(self.structures[i], survival)
            else:
                total += self._base_expected[i]
        return float(total)

    def terminal_value(self, q_ids, r_ids) -> float:
        """Expected final weight after applying the policy to observed (q, r)."""
        queried = frozenset(q_ids)
        rejected = frozenset(r_ids)
        if not rejected <= queried:
            raise ValueError("rejections must be a subset of the queried edges")
        key = (queried, rejected)
        hit = self._terminal_cache.get(key)
        if hit is None:
            hit = self._scenario_value(queried, rejected)
            self._terminal_cache[key] = hit
        return hit

    def matching(self, q_ids, r_ids) -> tuple[Matching, float]:
        """The policy's matching for observed (q, r) plus its expected weight."""
        value = self.terminal_value(q_ids, r_ids)
        selected = self._select(frozenset(q_ids), frozenset(r_ids))
        return _make_matching(self.structures, selected), value

    # -- the single-stage objective -----------------------------------------

    def value(self, edge_ids) -> float:
        """V^S(q): expected final matching weight of querying the given set."""
        queried = frozenset(int(e) for e in edge_ids)
        hit = self._value_cache.get(queried)
        if hit is not None:
            return hit
        if len(queried) < self.eval_cfg.exact_cap:
            value = self._exact_value(queried)
        else:
            value = float(np.mean(self.scenario_values(queried)))
        self._value_cache[queried] = value
        return value

    def _exact_value(self, queried: frozenset) -> float:
        order = sorted(queried)
        p_rej = self.spec.p_reject
        total = 0.0
        for pattern in range(2 ** len(order)):
            rejected = []
            prob = 1.0
            for k, e in enumerate(order):
                if (pattern >> k) & 1:
                    rejected.append(e)
                    prob *= p_rej[e]
                else:
                    prob *= 1.0 - p_rej[e]
            total += prob * self._scenario_value(queried, frozenset(rejected))
        return float(total)

    def scenario_values(self, edge_ids) -> np.ndarray:
        """Per-scenario values of the sampled estimator (the bootstrap pool)."""
        queried = frozenset(int(e) for e in edge_ids)
        order = sorted(queried)
        if self._uniforms is None:
            self._uniforms = np.vstack(
                [
                    scenario_uniforms(
                        self.eval_cfg.seed, PHASE_REJECTIONS, s, self.graph.num_edges
                    )
                    for s in range(self.eval_cfg.samples)
                ]
            )
        p_rej = self.spec.p_reject
        values = np.empty(self.eval_cfg.samples)
        for s in range(self.eval_cfg.samples):
            row = self._uniforms[s]
            rejected = frozenset(e for e in order if row[e] < p_rej[e])
            values[s] = self._scenario_value(queried, rejected)
        return values


def objective_single_stage(
    graph: ExchangeGraph,
    spec: DistributionSpec,
    policy: str,
    edge_ids,
    structures=None,
    eval_cfg: EvalConfig | None = None,
    legal: LegalEdgeSets | None = None,
) -> float:
    """One-shot convenience wrapper around ObjectiveEvaluator.value."""
    if legal is not None and not legal.admits(edge_ids):
        raise ValueError("query set is not legal")
    if structures is None:
        structures = enumerate_structures(graph)
    evaluator = ObjectiveEvaluator(graph, structures, spec, policy, eval_cfg)
    return evaluator.value(edge_ids)


# -- search algorithms ------------------------------------------------------


@dataclass
class ExhaustiveResult:
    query_set: tuple[int, ...]
    value: float
    nodes_evaluated: int


class NodeCapExceeded(RuntimeError):
    """Exhaustive search ran out of its node budget; carries the best found."""

    def __init__(self, best_query_set, best_value, nodes_evaluated):
        self.best_query_set = best_query_set
        self.best_value = best_value
        self.nodes_evaluated = nodes_evaluated
        super().__init__(
            f"node cap exceeded after {nodes_evaluated} nodes; "
            f"best so far {best_query_set} = {best_value}"
        )


def exhaustive_opt(
    evaluator: ObjectiveEvaluator,
    legal: LegalEdgeSets,
    node_cap: int = 1_000_000,
) -> ExhaustiveResult:
    """Depth-first sweep of every legal query set, returning the best node at
    any level (the optimum can sit strictly inside the tree). Ties go to the
    first set found in DFS order, which is deterministic."""
    best_q: tuple[int, ...] = ()
    best_v = -math.inf
    nodes = 0

    def visit(q: frozenset, last: int):
        nonlocal best_q, best_v, nodes
        nodes += 1
        if nodes > node_cap:
            raise NodeCapExceeded(best_q, best_v, nodes - 1)
        v = evaluator.value(q)
        if v > best_v:
            best_v = v
            best_q = tuple(sorted(q))
        for e in legal.extensions(q):
            if e > last:
                visit(q | {e}, e)

    visit(frozenset(), -1)
    return ExhaustiveResult(query_set=best_q, value=best_v, nodes_evaluated=nodes)


@dataclass
class GreedyResult:
    """Final greedy node plus the best node seen along the path (the
    objective is not monotone, so the final node can be worse)."""

    query_set: tuple[int, ...]
    value: float
    best_query_set: tuple[int, ...]
    best_value: float
    trace: tuple[tuple[int, Optional[int], float], ...]  # (level, added edge, value)


def greedy_single_stage(evaluator: ObjectiveEvaluator, legal: LegalEdgeSets) -> GreedyResult:
    """From the empty set, repeatedly move to the child with the greatest
    objective until no child remains; ties break to the smallest added edge."""
    q: frozenset = frozenset()
    v = evaluator.value(q)
    best_q, best_v = q, v
    trace = [(0, None, v)]
    while True:
        exts = legal.extensions(q)
        if not exts:
            break
        pick_e, pick_v = None, -math.inf
        for e in exts:
            cv = evaluator.value(q | {e})
            if cv > pick_v:
                pick_e, pick_v = e, cv
        q = q | {pick_e}
        v = pick_v
        trace.append((len(q), pick_e, v))
        if v > best_v:
            best_q, best_v = q, v
    return GreedyResult(
        query_set=tuple(sorted(q)),
        value=v,
        best_query_set=tuple(sorted(best_q)),
        best_value=best_v,
        trace=tuple(trace),
    )


class UcbStats(NamedTuple):
    total: float  # accumulated sampled value (U)
    visits: int  # visit count (N)


def ucb_score(stats: UcbStats, parent_visits: int, v_min: float, v_max: float) -> float:
    """Normalized mean value plus sqrt(parent visits / visits) exploration
    bonus; unvisited nodes score +infinity so each child is tried once."""
    if stats.visits == 0:
        return math.inf
    if v_max == v_min:
        normalized = 0.0
    else:
        normalized = (stats.total / stats.visits - v_min) / (v_max - v_min)
    return normalized + math.sqrt(parent_visits / stats.visits)


@dataclass(frozen=True)
class MctsConfig:
    """Tree-search budget: exactly one of iterations_per_level (deterministic,
    used by tests) or seconds_per_level (wall clock, for long parity runs)."""

    lookahead: int = 2
    iterations_per_level: int | None = 1000
    seconds_per_level: float | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.iterations_per_level is None) == (self.seconds_per_level is None):
            raise ValueError(
                "set exactly one of iterations_per_level and seconds_per_level"
            )
        if self.lookahead < 1:
            raise ValueError("lookahead must be >= 1")


@dataclass
class MctsResult:
    query_set: tuple[int, ...]
    value: float
    iterations: int


class _SingleStageSearch:
    """One UCT search instance: level-windowed statistics, a moving root, and
    a global incumbent over every node whose objective gets evaluated."""

    def __init__(self, evaluator, legal, cfg):
        self.evaluator = evaluator
        self.legal = legal
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.k = legal.max_size()
        self.v_min = math.inf
        self.v_max = -math.inf
        self.best_q: frozenset = frozenset()
        self.best_v = -math.inf
        self.totals: dict[frozenset, float] = {}
        self.visits: dict[frozenset, int] = {}
        self.iterations = 0

    def node_value(self, q: frozenset) -> float:
        v = self.evaluator.value(q)
        self.v_min = min(self.v_min, v)
        self.v_max = max(self.v_max, v)
        if v > self.best_v:
            self.best_v = v
            self.best_q = q
        return v

    def run(self) -> MctsResult:
        root: frozenset = frozenset()
        self.node_value(root)
        for level in range(1, self.k + 1):
            exts = self.legal.extensions(root)
            if not exts:
                break
            window_cap = min(level + self.cfg.lookahead, self.k)
            self.totals.clear()
            self.visits.clear()
            for _ in self._budget():
                self._sample(root, window_cap)
                self.iterations += 1
            root = self._advance(root, exts)
        return MctsResult(
            query_set=tuple(sorted(self.best_q)),
            value=self.best_v,
            iterations=self.iterations,
        )

    def _budget(self):
        if self.cfg.iterations_per_level is not None:
            yield from range(self.cfg.iterations_per_level)
            return
        deadline = time.monotonic() + self.cfg.seconds_per_level
        while time.monotonic() < deadline:
            yield None

    def _advance(self, root, exts):
        best_e, best_total = exts[0], -math.inf
        for e in exts:
            total = self.totals.get(root | {e}, 0.0)
            if total > best_total:
                best_e, best_total = e, total
        return root | {best_e}

    def _sample(self, q: frozenset, window_cap: int) -> float:
        self.visits[q] = self.visits.get(q, 0) + 1
        v_here = self.node_value(q)
        exts = self.legal.extensions(q)
        if not exts:
            return v_here
        if len(q) < window_cap:
            child = self._ucb_child(q, exts)
            v = self._sample(child, window_cap)
        else:
            v = self.node_value(self._rollout(q))
        self.totals[q] = self.totals.get(q, 0.0) + v
        return v

    def _ucb_child(self, q, exts):
        parent_visits = self.visits[q]
        best_c, best_score = None, -math.inf
        for e in exts:
            c = q | {e}
            stats = UcbStats(self.totals.get(c, 0.0), self.visits.get(c, 0))
            score = ucb_score(stats, parent_visits, self.v_min, self.v_max)
            if score > best_score:
                best_c, best_score = c, score
        return best_c

    def _rollout(self, q: frozenset) -> frozenset:
        """Random descendant: uniform target depth, uniform legal completion."""
        target = self.rng.randint(len(q) + 1, max(len(q) + 1, self.k))
        current = q
        while len(current) < target:
            exts = self.legal.extensions(current)
            if not exts:
                break
            current = current | {self.rng.choice(exts)}
        return current


def mcts_single_stage(
    evaluator: ObjectiveEvaluator, legal: LegalEdgeSets, cfg: MctsConfig
) -> MctsResult:
    """UCT search over query sets with iterative root advancement.

    For each level, statistics live only for the next `lookahead` levels;
    after the level budget the root moves to the child with the greatest
    accumulated value. The returned set is the best node evaluated anywhere
    during the search, including random rollout descendants.
    """
    return _SingleStageSearch(evaluator, legal, cfg).run()


# -- multi-stage (one edge at a time, responses observed immediately) -------


def one_step_values(
    evaluator: ObjectiveEvaluator, q_ids, r_ids, edge: int
) -> tuple[float, float, float]:
    """Value of querying `edge` next and then matching: returns (expected
    value, accept-branch weight, reject-branch weight), where the branches
    are weighted by the edge's acceptance and rejection probabilities."""
    queried = frozenset(q_ids)
    rejected = frozenset(r_ids)
    p_reject = float(evaluator.spec.p_reject[edge])
    q2 = queried | {edge}
    accept_w = evaluator.terminal_value(q2, rejected)
    reject_w = evaluator.terminal_value(q2, rejected | {edge})
    return (1.0 - p_reject) * accept_w + p_reject * reject_w, accept_w, reject_w


def greedy_next_edge(
    evaluator: ObjectiveEvaluator, legal: LegalEdgeSets, q_ids, r_ids
) -> Optional[int]:
    """Myopic next query: the legal extension maximizing the one-step value
    (every edge treated as if it were the last), smallest edge id on ties;
    None when no legal extension remains."""
    queried = frozenset(q_ids)
    rejected = frozenset(r_ids)
    if not rejected <= queried:
        raise ValueError("rejections must be a subset of the queried edges")
    exts = legal.extensions(queried)
    if not exts:
        return None
    best_e, best_v = None, -math.inf
    for e in exts:
        v, _, _ = one_step_values(evaluator, queried, rejected, e)
        if v > best_v:
            best_e, best_v = e, v
    return best_e


class _MultiStageSearch:
    """UCT over the alternating outcome/query tree rooted at observed (q, r).

    Outcome nodes are (queried, rejected) states; their children are query
    nodes, one per legal unqueried edge. A query node has two outcomes,
    accepted or rejected, sampled with the edge's rejection probability. Only
    leaf outcome nodes carry a value (the post-policy expected weight).
    """

    def __init__(self, evaluator, legal, cfg):
        self.evaluator = evaluator
        self.legal = legal
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.totals: dict[tuple, float] = {}
        self.visits: dict[tuple, int] = {}
        self.outcome_visits: dict[tuple, int] = {}
        self.v_min = math.inf
        self.v_max = -math.inf

    def leaf_value(self, queried, rejected) -> float:
        v = self.evaluator.terminal_value(queried, rejected)
        self.v_min = min(self.v_min, v)
        self.v_max = max(self.v_max, v)
        return v

    def run(self, queried: frozenset, rejected: frozenset) -> Optional[int]:
        exts = self.legal.extensions(queried)
        if not exts:
            return None
        window_cap = min(len(queried) + self.cfg.lookahead, self.legal.max_size())
        for _ in self._budget():
            self._qsample(queried, rejected, window_cap)
        best_e, best_total = exts[0], -math.inf
        for e in exts:
            total = self.totals.get((queried, rejected, e), 0.0)
            if total > best_total:
                best_e, best_total = e, total
        return best_e

    def _budget(self):
        if self.cfg.iterations_per_level is not None:
            yield from range(self.cfg.iterations_per_level)
            return
        deadline = time.monotonic() + self.cfg.seconds_per_level
        while time.monotonic() < deadline:
            yield None

    def _qsample(self, queried, rejected, window_cap) -> float:
        okey = (queried, rejected)
        self.outcome_visits[okey] = self.outcome_visits.get(okey, 0) + 1
        exts = self.legal.extensions(queried)
        if not exts:
            return self.leaf_value(queried, rejected)
        if len(queried) < window_cap:
            edge = self._ucb_query_child(okey, exts)
            return self._osample(queried, rejected, edge, window_cap)
        q2, r2 = self._random_leaf(queried, rejected)
        return self.leaf_value(q2, r2)

    def _ucb_query_child(self, okey, exts):
        parent_visits = self.outcome_visits[okey]
        best_e, best_score = None, -math.inf
        for e in exts:
            stats = UcbStats(
                self.totals.get(okey + (e,), 0.0), self.visits.get(okey + (e,), 0)
            )
            score = ucb_score(stats, parent_visits, self.v_min, self.v_max)
            if score > best_score:
                best_e, best_score = e, score
        return best_e

    def _osample(self, queried, rejected, edge, window_cap) -> float:
        qkey = (queried, rejected, edge)
        self.visits[qkey] = self.visits.get(qkey, 0) + 1
        q2 = queried | {edge}
        r2 = rejected | {edge} if self._sample_rejection(edge) else rejected
        v = self._qsample(q2, r2, window_cap)
        self.totals[qkey] = self.totals.get(qkey, 0.0) + v
        return v

    def _sample_rejection(self, edge) -> bool:
        return self.rng.random() < float(self.evaluator.spec.p_reject[edge])

    def _random_leaf(self, queried, rejected):
        """Uniformly random remaining queries with responses drawn from the
        rejection distribution, down to a leaf outcome node."""
        q, r = queried, rejected
        while True:
            exts = self.legal.extensions(q)
            if not exts:
                return q, r
            e = self.rng.choice(exts)
            q = q | {e}
            if self._sample_rejection(e):
                r = r | {e}


def mcts_next_edge(
    evaluator: ObjectiveEvaluator,
    legal: LegalEdgeSets,
    q_ids,
    r_ids,
    cfg: MctsConfig,
) -> Optional[int]:
    """UCT recommendation for the next edge to query given observed (q, r);
    returns the root's query child with the greatest accumulated value, or
    None when no legal extension remains."""
    queried = frozenset(q_ids)
    rejected = frozenset(r_ids)
    if not rejected <= queried:
        raise ValueError("rejections must be a subset of the queried edges")
    return _MultiStageSearch(evaluator, legal, cfg).run(queried, rejected)


def selection_result_json(method, query_set, value, eval_cfg, trace=None) -> dict:
    """Wire format for a selection result."""
    query_set = sorted(int(e) for e in query_set)
    mode = "exact" if len(query_set) < eval_cfg.exact_cap else "sampled"
    out = {
        "method": method,
        "queried_edges": query_set,
        "objective_value": value,
        "evaluation": {
            "mode": mode,
            "samples": eval_cfg.samples,
            "seed": eval_cfg.seed,
        },
    }
    if trace is not None:
        out["trace"] = [
            {"level": lvl, "added_edge": e, "value": v} for (lvl, e, v) in trace
        ]
    return out
