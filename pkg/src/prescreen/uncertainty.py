"""Per-edge rejection and failure distributions, plus scenario machinery.

Each edge carries three probabilities: p_reject (a queried edge is refused
pre-match), p_success_queried (a queried-and-accepted edge survives
post-match), and p_success_unqueried (an edge that was never queried survives
post-match). Edges are independent.

Random draws use counter-style streams keyed by (seed, phase, scenario), so
the uniform variate behind edge e in scenario s never depends on which other
edges are queried. That gives common random numbers across methods compared
on the same instance, and makes every sample reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PHASE_REJECTIONS = 0
PHASE_FAILURES = 1
PHASE_REALIZATIONS = 2

DEFAULT_EXACT_ENUMERATION_CAP = 10


@dataclass(frozen=True)
class EdgeProbabilities:
    p_reject: float
    p_success_queried: float
    p_success_unqueried: float


@dataclass(frozen=True)
class Assumption1Result:
    """Whether querying can never raise an edge's overall death probability."""

    ok: bool
    violations: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class RejectionScenario:
    rejections: np.ndarray
    probability: float


class DistributionSpec:
    """Per-edge probabilities for a whole graph, indexed by edge id."""

    def __init__(self, p_reject, p_success_queried, p_success_unqueried, provenance=None):
        self.p_reject = np.asarray(p_reject, dtype=float)
        self.p_success_queried = np.asarray(p_success_queried, dtype=float)
        self.p_success_unqueried = np.asarray(p_success_unqueried, dtype=float)
        self.provenance = dict(provenance or {})
        if not (
            len(self.p_reject) == len(self.p_success_queried) == len(self.p_success_unqueried)
        ):
            raise ValueError("probability arrays must cover the same edges")
        for name, arr in (
            ("p_reject", self.p_reject),
            ("p_success_queried", self.p_success_queried),
            ("p_success_unqueried", self.p_success_unqueried),
        ):
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def num_edges(self) -> int:
        return len(self.p_reject)

    def edge_probs(self, edge_id: int) -> EdgeProbabilities:
        return EdgeProbabilities(
            p_reject=float(self.p_reject[edge_id]),
            p_success_queried=float(self.p_success_queried[edge_id]),
            p_success_unqueried=float(self.p_success_unqueried[edge_id]),
        )

    def to_json_dict(self) -> dict:
        return {
            "edges": {
                str(e): {
                    "p_reject": float(self.p_reject[e]),
                    "p_success_queried": float(self.p_success_queried[e]),
                    "p_success_unqueried": float(self.p_success_unqueried[e]),
                }
                for e in range(self.num_edges)
            },
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DistributionSpec":
        per_edge = data["edges"]
        keys = sorted(int(k) for k in per_edge)
        if keys != list(range(len(keys))):
            raise ValueError("distribution must cover edge ids 0..m-1 exactly once")
        return cls(
            p_reject=[per_edge[str(e)]["p_reject"] for e in keys],
            p_success_queried=[per_edge[str(e)]["p_success_queried"] for e in keys],
            p_success_unqueried=[per_edge[str(e)]["p_success_unqueried"] for e in keys],
            provenance=data.get("provenance"),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "DistributionSpec":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def make_simple(graph) -> DistributionSpec:
    """Uniform stress distribution: every edge rejects at 0.5, accepted edges
    never fail, unqueried edges fail at 0.5."""
    m = graph.num_edges
    return DistributionSpec(
        p_reject=np.full(m, 0.5),
        p_success_queried=np.ones(m),
        p_success_unqueried=np.full(m, 0.5),
        provenance={"kind": "simple"},
    )


def make_kpd(graph, high_risk, seed: int) -> DistributionSpec:
    """Fielded-exchange-style distribution.

    p_reject ~ U(0.25, 0.43) per edge (roughly a third of edges get refused).
    Edges into highly sensitized patients are passed in as high_risk and get
    much lower post-match success (p_success_queried ~ U(0.2, 0.5),
    p_success_unqueried ~ U(0.0, 0.2)); all other edges get
    p_success_queried ~ U(0.9, 1.0) and p_success_unqueried ~ U(0.8, 0.9).
    """
    m = graph.num_edges
    high_risk = set(high_risk)
    unknown = high_risk - set(range(m))
    if unknown:
        raise ValueError(f"unknown edge ids in high_risk: {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    p_reject = rng.uniform(0.25, 0.43, size=m)
    p_q = np.empty(m)
    p_n = np.empty(m)
    for e in range(m):
        if e in high_risk:
            p_q[e] = rng.uniform(0.2, 0.5)
            p_n[e] = rng.uniform(0.0, 0.2)
        else:
            p_q[e] = rng.uniform(0.9, 1.0)
            p_n[e] = rng.uniform(0.8, 0.9)
    return DistributionSpec(
        p_reject=p_reject,
        p_success_queried=p_q,
        p_success_unqueried=p_n,
        provenance={"kind": "kpd", "seed": seed, "high_risk": sorted(high_risk)},
    )


def as_bits(edge_ids, num_edges: int) -> np.ndarray:
    """Binary indicator vector over edge ids."""
    bits = np.zeros(num_edges, dtype=np.int8)
    for e in edge_ids:
        bits[e] = 1
    return bits


def scenario_uniforms(seed: int, phase: int, scenario: int, num_edges: int) -> np.ndarray:
    """One uniform variate per edge, fixed by (seed, phase, scenario).

    Edge e's variate does not depend on the query set, so enlarging a query
    set never perturbs the draws of other edges.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, phase, scenario]))
    return rng.random(num_edges)


def check_consistent(q: np.ndarray, r: np.ndarray) -> None:
    if len(q) != len(r):
        raise ValueError("q and r must have the same length")
    if np.any((r == 1) & (q == 0)):
        raise ValueError("rejection vector marks a non-queried edge")


def sample_rejections(spec: DistributionSpec, q: np.ndarray, seed: int, scenario: int = 0) -> np.ndarray:
    """Draw one rejection vector: queried edges reject independently with
    their p_reject; non-queried edges never reject."""
    q = np.asarray(q)
    if len(q) != spec.num_edges:
        raise ValueError("query vector length does not match distribution")
    u = scenario_uniforms(seed, PHASE_REJECTIONS, scenario, spec.num_edges)
    r = ((q == 1) & (u < spec.p_reject)).astype(np.int8)
    return r


def sample_failures(
    spec: DistributionSpec, q: np.ndarray, r: np.ndarray, seed: int, scenario: int = 0
) -> np.ndarray:
    """Draw one post-match failure vector given query set and rejections.

    Queried-and-accepted edges fail with 1 - p_success_queried, non-queried
    edges with 1 - p_success_unqueried, and rejected edges are already dead
    so their failure bit stays 0 (keeps r + f a valid indicator vector).
    """
    q = np.asarray(q)
    r = np.asarray(r)
    check_consistent(q, r)
    u = scenario_uniforms(seed, PHASE_FAILURES, scenario, spec.num_edges)
    fail_prob = np.where(q == 1, 1.0 - spec.p_success_queried, 1.0 - spec.p_success_unqueried)
    f = ((r == 0) & (u < fail_prob)).astype(np.int8)
    return f


def enumerate_rejection_scenarios(
    spec: DistributionSpec, q: np.ndarray, max_edges: int = DEFAULT_EXACT_ENUMERATION_CAP
) -> list[RejectionScenario]:
    """All 2^|q| rejection patterns over the queried edges with their
    product-form probabilities. Refuses query sets above max_edges; callers
    should fall back to sampling there."""
    q = np.asarray(q)
    queried = [int(e) for e in np.flatnonzero(q == 1)]
    if len(queried) > max_edges:
        raise ValueError(
            f"query set has {len(queried)} edges, above the exact-enumeration "
            f"cap of {max_edges}; use sampling instead"
        )
    scenarios = []
    for pattern in range(2 ** len(queried)):
        r = np.zeros(spec.num_edges, dtype=np.int8)
        prob = 1.0
        for k, e in enumerate(queried):
            if (pattern >> k) & 1:
                r[e] = 1
                prob *= spec.p_reject[e]
            else:
                prob *= 1.0 - spec.p_reject[e]
        scenarios.append(RejectionScenario(rejections=r, probability=float(prob)))
    return scenarios


def overall_death_probability(spec: DistributionSpec, edge_id: int, queried: bool) -> float:
    """E[r_e + f_e]: chance the edge ends up unusable, by query status."""
    probs = spec.edge_probs(edge_id)
    if queried:
        return probs.p_reject + (1.0 - probs.p_reject) * (1.0 - probs.p_success_queried)
    return 1.0 - probs.p_success_unqueried


def check_assumption_1(spec: DistributionSpec) -> Assumption1Result:
    """Pass iff querying an edge never raises its overall death probability.

    This is the condition under which more querying can only help a
    failure-aware matching policy.
    """
    violations = tuple(
        e
        for e in range(spec.num_edges)
        if overall_death_probability(spec, e, queried=True)
        > overall_death_probability(spec, e, queried=False) + 1e-12
    )
    return Assumption1Result(ok=not violations, violations=violations)
