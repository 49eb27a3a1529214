"""Independent oracles used by the test suite.

Everything here deliberately avoids the production evaluation paths: graph
structures come from a permutation sweep, expectations from enumerating
failure patterns, objectives from enumerating rejection scenarios around the
brute-force packing enumerator, and multi-stage values from a recursive
expectimax. Expected values in tests are frozen from these oracles.
"""

from __future__ import annotations

import itertools

import numpy as np

from prescreen.graph import CHAIN, CYCLE, NDD, PAIR, CycleChain, ExchangeGraph
from prescreen.matching import MAX_WEIGHT, brute_force_packing, realized_weight
from prescreen.uncertainty import DistributionSpec


def brute_force_structures(graph: ExchangeGraph, max_cycle_len: int, max_chain_len: int):
    """Enumerate cycles and chains by trying every vertex sequence."""
    edge_of = {(e.source, e.target): e for e in graph.edges}
    kind_of = {v.id: v.kind for v in graph.vertices}
    found = set()

    vertex_ids = [v.id for v in graph.vertices]
    for length in range(2, max_cycle_len + 1):
        for seq in itertools.permutations(vertex_ids, length):
            if any(kind_of[v] != PAIR for v in seq):
                continue
            if min(seq) != seq[0]:
                continue  # canonical rotation only
            pairs = list(zip(seq, seq[1:] + (seq[0],)))
            if all(p in edge_of for p in pairs):
                found.add((CYCLE, tuple(edge_of[p].id for p in pairs)))

    for length in range(1, max_chain_len + 1):
        for seq in itertools.permutations(vertex_ids, length + 1):
            if kind_of[seq[0]] != NDD or any(kind_of[v] != PAIR for v in seq[1:]):
                continue
            pairs = list(zip(seq, seq[1:]))
            if all(p in edge_of for p in pairs):
                found.add((CHAIN, tuple(edge_of[p].id for p in pairs)))

    return found


def oracle_structure_expectation(structure: CycleChain, survival: np.ndarray, num_edges: int) -> float:
    """Expected realized weight by enumerating all failure patterns."""
    k = len(structure.edges)
    total = 0.0
    for pattern in range(2**k):
        dead = np.zeros(num_edges, dtype=np.int8)
        prob = 1.0
        for i, e in enumerate(structure.edges):
            if (pattern >> i) & 1:
                dead[e] = 1
                prob *= 1.0 - survival[e]
            else:
                prob *= survival[e]
        total += prob * realized_weight(structure, dead)
    return total


def oracle_survival(spec: DistributionSpec, queried, rejected) -> np.ndarray:
    s = np.array(spec.p_success_unqueried, dtype=float)
    for e in queried:
        s[e] = spec.p_success_queried[e]
    for e in rejected:
        s[e] = 0.0
    return s


def oracle_f_value(structure: CycleChain, rejected) -> float:
    # realized weight over the rejections alone is exactly the policy's F
    size = 1 + max([max(structure.edges)] + list(rejected))
    dead = np.zeros(size, dtype=np.int8)
    for e in rejected:
        dead[e] = 1
    return realized_weight(structure, dead)


def oracle_terminal(structures, spec, policy, queried, rejected, num_edges) -> float:
    """Policy application plus expected weight, via the brute-force packer
    and failure-pattern enumeration."""
    queried = frozenset(queried)
    rejected = frozenset(rejected)
    if policy == MAX_WEIGHT:
        values = [oracle_f_value(c, rejected) for c in structures]
    else:
        s = oracle_survival(spec, queried, rejected)
        values = [oracle_structure_expectation(c, s, num_edges) for c in structures]
    matching = brute_force_packing(structures, values)
    s = oracle_survival(spec, queried, rejected)
    return sum(oracle_structure_expectation(c, s, num_edges) for c in matching.structures)


def oracle_objective(structures, spec, policy, queried, num_edges) -> float:
    """Single-stage objective by enumerating every rejection scenario."""
    queried = sorted(queried)
    total = 0.0
    for pattern in range(2 ** len(queried)):
        rejected = set()
        prob = 1.0
        for i, e in enumerate(queried):
            if (pattern >> i) & 1:
                rejected.add(e)
                prob *= spec.p_reject[e]
            else:
                prob *= 1.0 - spec.p_reject[e]
        total += prob * oracle_terminal(structures, spec, policy, queried, rejected, num_edges)
    return total


def oracle_expectimax(structures, spec, policy, legal, queried, rejected, num_edges):
    """Forced-query multi-stage value and argmax first edge: at each stage
    query the edge maximizing the expected continuation, with responses drawn
    from the rejection distribution."""
    queried = frozenset(queried)
    rejected = frozenset(rejected)

    def value(q, r):
        exts = legal.extensions(q)
        if not exts:
            return oracle_terminal(structures, spec, policy, q, r, num_edges)
        return max(q_value(q, r, e) for e in exts)

    def q_value(q, r, e):
        p = float(spec.p_reject[e])
        return (1.0 - p) * value(q | {e}, r) + p * value(q | {e}, r | {e})

    exts = legal.extensions(queried)
    if not exts:
        return None, oracle_terminal(structures, spec, policy, queried, rejected, num_edges)
    best_e, best_v = None, -np.inf
    for e in exts:
        v = q_value(queried, rejected, e)
        if v > best_v:
            best_e, best_v = e, v
    return best_e, best_v


def make_assumption1_spec(num_edges: int, seed: int) -> DistributionSpec:
    """Random independent distribution under which querying never raises an
    edge's overall death probability: p_success_unqueried is drawn below
    (1 - p_reject) * p_success_queried."""
    rng = np.random.default_rng(seed)
    p_reject = rng.uniform(0.0, 0.6, size=num_edges)
    p_q = rng.uniform(0.5, 1.0, size=num_edges)
    p_n = rng.uniform(0.0, 1.0, size=num_edges) * (1.0 - p_reject) * p_q
    return DistributionSpec(p_reject, p_q, p_n, provenance={"kind": "test-assumption1", "seed": seed})


def random_structure(rng, max_edges: int = 12):
    """A standalone cycle or chain over its own private edge universe."""
    k = int(rng.integers(1, max_edges + 1))
    kind = CHAIN if (k == 1 or rng.random() < 0.5) else CYCLE
    edge_ids = tuple(int(e) for e in rng.permutation(max_edges)[:k])
    weights = tuple(float(w) for w in rng.uniform(0.1, 3.0, size=k))
    n_vertices = k + 1 if kind == CHAIN else k
    return CycleChain(
        kind=kind,
        edges=edge_ids,
        vertices=tuple(range(n_vertices)),
        edge_weights=weights,
        nominal_weight=float(sum(weights)),
    )


def random_spec(num_edges: int, seed: int) -> DistributionSpec:
    rng = np.random.default_rng(seed)
    return DistributionSpec(
        rng.uniform(0, 1, num_edges),
        rng.uniform(0, 1, num_edges),
        rng.uniform(0, 1, num_edges),
        provenance={"kind": "test-random", "seed": seed},
    )
