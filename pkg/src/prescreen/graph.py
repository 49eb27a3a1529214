"""Exchange graph model: patient-donor pairs, non-directed donors, and the
cycles and chains that can be transplant-matched on them.

Vertices are either incompatible patient-donor pairs ("pair") or non-directed
donors ("ndd", altruists with no paired patient). Directed edges are potential
transplants from the source vertex's donor to the target vertex's patient;
edge weights are the utility assigned by the exchange. NDDs never receive a
kidney, so no edge may point at an NDD, and NDDs can only start chains.

All objects are immutable after construction; every operation here is a pure
function, safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PAIR = "pair"
NDD = "ndd"

CYCLE = "cycle"
CHAIN = "chain"

DEFAULT_MAX_CYCLE_LEN = 3
DEFAULT_MAX_CHAIN_LEN = 3


class GraphValidationError(ValueError):
    """Raised when a graph fails validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid exchange graph: " + "; ".join(self.violations))


@dataclass(frozen=True)
class Vertex:
    id: int
    kind: str  # PAIR or NDD


@dataclass(frozen=True)
class Edge:
    id: int
    source: int
    target: int
    weight: float = 1.0


@dataclass(frozen=True)
class CycleChain:
    """One enumerated cycle or chain, the unit a matching selects.

    ``edges`` is the ordered edge-id list; ``vertices`` the visit order
    (cycles start at their smallest vertex id, chains at their NDD).
    ``edge_weights`` mirrors ``edges``; ``nominal_weight`` is their sum.
    """

    kind: str  # CYCLE or CHAIN
    edges: tuple[int, ...]
    vertices: tuple[int, ...]
    edge_weights: tuple[float, ...]
    nominal_weight: float

    def __len__(self) -> int:
        return len(self.edges)


class ExchangeGraph:
    """Directed compatibility graph over pair and NDD vertices.

    Vertex and edge ids are contiguous from 0; edge ids index every binary
    vector (query sets, rejection and failure vectors) used elsewhere.
    """

    def __init__(self, vertices, edges):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self._out = None
        self._weights = None

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def ndd_ids(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.vertices if v.kind == NDD)

    def out_edges(self, vertex_id: int) -> tuple[Edge, ...]:
        if self._out is None:
            out = [[] for _ in range(self.num_vertices)]
            for e in self.edges:
                out[e.source].append(e)
            for lst in out:
                lst.sort(key=lambda e: e.target)
            self._out = tuple(tuple(lst) for lst in out)
        return self._out[vertex_id]

    def edge_weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = np.array([e.weight for e in self.edges], dtype=float)
        return self._weights

    def validate(self) -> list[str]:
        return validate_graph(self)

    def to_json_dict(self) -> dict:
        return {
            "vertices": [{"id": v.id, "kind": v.kind} for v in self.vertices],
            "edges": [
                {"id": e.id, "source": e.source, "target": e.target, "weight": e.weight}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExchangeGraph":
        graph = cls(
            vertices=[Vertex(id=v["id"], kind=v["kind"]) for v in data["vertices"]],
            edges=[
                Edge(
                    id=e["id"],
                    source=e["source"],
                    target=e["target"],
                    weight=float(e.get("weight", 1.0)),
                )
                for e in data["edges"]
            ],
        )
        violations = graph.validate()
        if violations:
            raise GraphValidationError(violations)
        return graph

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "ExchangeGraph":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def validate_graph(graph: ExchangeGraph) -> list[str]:
    """Check every structural invariant; returns one message per violation.

    An empty list means the graph is valid. Violations are data, not errors:
    callers that need a hard failure should raise GraphValidationError.
    """
    violations = []
    n = graph.num_vertices

    seen_vertex_ids = set()
    for v in graph.vertices:
        if v.kind not in (PAIR, NDD):
            violations.append(f"vertex {v.id}: unknown kind {v.kind!r}")
        if v.id in seen_vertex_ids:
            violations.append(f"vertex {v.id}: duplicate id")
        seen_vertex_ids.add(v.id)
    if seen_vertex_ids != set(range(n)):
        violations.append("vertex ids are not contiguous from 0")

    kind_of = {v.id: v.kind for v in graph.vertices}
    seen_edge_ids = set()
    seen_endpoint_pairs = set()
    for e in graph.edges:
        if e.id in seen_edge_ids:
            violations.append(f"edge {e.id}: duplicate id")
        seen_edge_ids.add(e.id)
        if e.source not in kind_of or e.target not in kind_of:
            violations.append(f"edge {e.id}: endpoint references missing vertex")
            continue
        if e.source == e.target:
            violations.append(f"edge {e.id}: self loop at vertex {e.source}")
        if (e.source, e.target) in seen_endpoint_pairs:
            violations.append(
                f"edge {e.id}: duplicate edge for pair ({e.source}, {e.target})"
            )
        seen_endpoint_pairs.add((e.source, e.target))
        if kind_of[e.target] == NDD:
            violations.append(f"edge {e.id}: points into ndd vertex {e.target}")
        if e.weight < 0:
            violations.append(f"edge {e.id}: negative weight {e.weight}")
    if seen_edge_ids != set(range(graph.num_edges)):
        violations.append("edge ids are not contiguous from 0")

    return violations


def generate_random_graph(n: int, p: float, seed: int) -> ExchangeGraph:
    """Random directed compatibility graph on n vertices.

    Every ordered vertex pair gets an edge independently with probability p
    (so each unordered pair is tested once in each direction). Vertices left
    with no incoming edges become NDDs; all weights are 1. Deterministic for
    a given seed, byte-identical under serialization.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    rng = np.random.default_rng(seed)
    present = rng.random((n, n)) < p
    np.fill_diagonal(present, False)

    edges = []
    for source in range(n):
        for target in range(n):
            if present[source, target]:
                edges.append(Edge(id=len(edges), source=source, target=target, weight=1.0))

    has_incoming = [False] * n
    for e in edges:
        has_incoming[e.target] = True
    vertices = [
        Vertex(id=i, kind=PAIR if has_incoming[i] else NDD) for i in range(n)
    ]
    return ExchangeGraph(vertices, edges)


def enumerate_structures(
    graph: ExchangeGraph,
    max_cycle_len: int = DEFAULT_MAX_CYCLE_LEN,
    max_chain_len: int = DEFAULT_MAX_CHAIN_LEN,
) -> list[CycleChain]:
    """Enumerate every cycle (pairs only) and chain (NDD-started) within caps.

    Cycles are canonically rotated to start at their smallest vertex id, and
    chains of every length 1..max_chain_len are emitted (a chain and its
    shorter prefixes are distinct structures; the packing solver resolves
    their conflicts through shared vertices). Output is deduplicated and
    sorted lexicographically by edge-id sequence, so two calls on the same
    graph produce identical lists.
    """
    violations = graph.validate()
    if violations:
        raise GraphValidationError(violations)
    if max_cycle_len < 1 or max_chain_len < 1:
        raise ValueError("length caps must be >= 1")

    structures: list[CycleChain] = []

    def emit(kind, edge_objs, vertex_seq):
        structures.append(
            CycleChain(
                kind=kind,
                edges=tuple(e.id for e in edge_objs),
                vertices=tuple(vertex_seq),
                edge_weights=tuple(float(e.weight) for e in edge_objs),
                nominal_weight=float(sum(e.weight for e in edge_objs)),
            )
        )

    # cycles: DFS from each pair vertex, visiting only larger vertex ids so
    # each cycle is found exactly once, rotated to its smallest vertex
    pair_ids = [v.id for v in graph.vertices if v.kind == PAIR]
    for start in pair_ids:

        def cycle_dfs(current, path_vertices, path_edges):
            for e in graph.out_edges(current):
                if e.target == start and len(path_edges) >= 1:
                    emit(CYCLE, path_edges + [e], path_vertices)
                elif (
                    e.target > start
                    and e.target not in path_vertices
                    and len(path_edges) + 2 <= max_cycle_len
                ):
                    cycle_dfs(e.target, path_vertices + [e.target], path_edges + [e])

        if max_cycle_len >= 2:
            cycle_dfs(start, [start], [])

    # chains: every simple directed path leaving an NDD, one structure per length
    for ndd in graph.ndd_ids:

        def chain_dfs(current, path_vertices, path_edges):
            for e in graph.out_edges(current):
                if e.target in path_vertices:
                    continue
                extended = path_edges + [e]
                emit(CHAIN, extended, path_vertices + [e.target])
                if len(extended) < max_chain_len:
                    chain_dfs(e.target, path_vertices + [e.target], extended)

        chain_dfs(ndd, [ndd], [])

    structures.sort(key=lambda c: c.edges)
    return structures
