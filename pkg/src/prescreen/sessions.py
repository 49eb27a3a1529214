"""Stateful pre-screening sessions: one coordinator walking the sequential
query loop (recommend an edge, record the real-world response, repeat within
budget, finalize to a matching).

Sessions are persisted as append-only JSON event logs, one file per session,
so a restarted process replays the log and lands in exactly the same state.
Recommendations are recomputed on demand and cached per history length, which
makes repeated reads idempotent until the next response arrives. Coordinators
may respond for any legal unqueried edge, not only the recommended one; the
algorithms simply condition on whatever (queried, rejected) state exists.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid

from .fixtures import FIXTURE_GRAPHS
from .graph import ExchangeGraph, enumerate_structures
from .matching import MAX_WEIGHT, POLICIES
from .selection import (
    EvalConfig,
    LegalEdgeSets,
    MctsConfig,
    ObjectiveEvaluator,
    greedy_next_edge,
    mcts_next_edge,
    one_step_values,
)
from .uncertainty import DistributionSpec, make_kpd, make_simple

import numpy as np

ACCEPTED = "accepted"
REJECTED = "rejected"
RESPONSES = (ACCEPTED, REJECTED)

METHODS = ("greedy", "mcts")


class SessionError(Exception):
    code = "session_error"
    status = 400

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class NotFoundError(SessionError):
    code = "not_found"
    status = 404


class ConflictError(SessionError):
    code = "conflict"
    status = 409


class IllegalEdgeError(SessionError):
    code = "illegal_edge"
    status = 422


class InvalidInputError(SessionError):
    code = "invalid_input"
    status = 400


def _build_distribution(graph: ExchangeGraph, config: dict) -> DistributionSpec:
    kind = config.get("kind")
    if kind == "simple":
        return make_simple(graph)
    if kind == "kpd":
        seed = int(config.get("seed", 0))
        fraction = float(config.get("high_risk_fraction", 0.0))
        rng = np.random.default_rng(seed)
        m = graph.num_edges
        n_high = int(round(fraction * m))
        high_risk = set(rng.choice(m, size=n_high, replace=False).tolist()) if n_high else set()
        return make_kpd(graph, high_risk, seed=seed)
    if kind == "explicit":
        spec = DistributionSpec.from_json_dict(config["spec"])
        if spec.num_edges != graph.num_edges:
            raise InvalidInputError("distribution does not cover the graph's edges")
        return spec
    raise InvalidInputError(f"unknown distribution kind {kind!r}")


class Session:
    """One live pre-screening round over a fixed graph and distribution."""

    def __init__(self, session_id: str, graph_id: str, graph: ExchangeGraph, config: dict):
        self.id = session_id
        self.graph_id = graph_id
        self.graph = graph
        self.config = dict(config)
        self.policy = config.get("policy", MAX_WEIGHT)
        if self.policy not in POLICIES:
            raise InvalidInputError(f"unknown policy {self.policy!r}")
        self.method = config.get("method", "greedy")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        self.budget = int(config.get("budget", 3))
        if self.budget < 0:
            raise InvalidInputError("budget must be >= 0")
        self.seed = int(config.get("seed", 0))
        self.spec = _build_distribution(graph, config.get("distribution", {"kind": "simple"}))
        self.structures = enumerate_structures(
            graph,
            int(config.get("max_cycle_len", 3)),
            int(config.get("max_chain_len", 3)),
        )
        self.legal = LegalEdgeSets(
            graph,
            budget=self.budget,
            per_vertex_cap=config.get("per_vertex_cap"),
        )
        self.evaluator = ObjectiveEvaluator(
            graph,
            self.structures,
            self.spec,
            self.policy,
            EvalConfig(seed=self.seed),
        )
        self.queried: frozenset = frozenset()
        self.rejected: frozenset = frozenset()
        self.history: list[dict] = []
        self.status = "active"
        self.baseline = self.evaluator.value(())
        self._recommendation_cache: dict[int, dict | None] = {}
        self.lock = threading.Lock()

    # -- queries --------------------------------------------------------------

    def _require_active(self):
        if self.status != "active":
            raise ConflictError(f"session {self.id} is finalized")

    def recommendation(self) -> dict | None:
        """Next edge to query with its decision context, or None when no
        legal extension remains. Stable until a response is recorded."""
        self._require_active()
        step = len(self.history)
        if step in self._recommendation_cache:
            return self._recommendation_cache[step]
        if self.method == "greedy":
            edge = greedy_next_edge(self.evaluator, self.legal, self.queried, self.rejected)
        else:
            cfg = MctsConfig(
                lookahead=int(self.config.get("mcts_lookahead", 2)),
                iterations_per_level=int(self.config.get("mcts_iterations", 500)),
                seed=self.seed + 1000 * step,
            )
            edge = mcts_next_edge(self.evaluator, self.legal, self.queried, self.rejected, cfg)
        context = None if edge is None else self._edge_context(edge)
        self._recommendation_cache[step] = context
        return context

    def _edge_context(self, edge: int) -> dict:
        value, accept_w, reject_w = one_step_values(
            self.evaluator, self.queried, self.rejected, edge
        )
        e = self.graph.edges[edge]
        containing = [
            {"index": i, "kind": c.kind, "edges": list(c.edges), "vertices": list(c.vertices)}
            for i, c in enumerate(self.structures)
            if edge in c.edges
        ]
        return {
            "edge_id": edge,
            "source": e.source,
            "target": e.target,
            "weight": e.weight,
            "p_reject": float(self.spec.p_reject[edge]),
            "structures": containing,
            "one_step_value": value,
            "accept_expected_weight": accept_w,
            "reject_expected_weight": reject_w,
        }

    def current_matching(self) -> dict:
        matching, expected = self.evaluator.matching(self.queried, self.rejected)
        return matching.to_json_dict(expected_weight=expected)

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "graph": {
                "id": self.graph_id,
                "num_vertices": self.graph.num_vertices,
                "num_edges": self.graph.num_edges,
                "num_ndds": len(self.graph.ndd_ids),
            },
            "policy": self.policy,
            "method": self.method,
            "budget": self.budget,
            "budget_used": len(self.queried),
            "baseline_expected_weight": self.baseline,
            "queried_edges": sorted(self.queried),
            "rejected_edges": sorted(self.rejected),
            "history": list(self.history),
            "matching": self.current_matching(),
        }

    # -- mutations --------------------------------------------------------------

    def record_response(self, edge_id: int, response: str, timestamp: float | None = None) -> dict:
        """Commit the real-world answer for an edge (recommended or not, as
        long as it is legal and unqueried) and return the updated state."""
        self._require_active()
        if response not in RESPONSES:
            raise InvalidInputError(f"response must be one of {RESPONSES}")
        if not isinstance(edge_id, int) or not 0 <= edge_id < self.graph.num_edges:
            raise IllegalEdgeError(f"unknown edge id {edge_id}")
        if edge_id in self.queried:
            raise ConflictError(f"edge {edge_id} was already queried")
        if not self.legal.admits(self.queried | {edge_id}):
            raise IllegalEdgeError(
                f"querying edge {edge_id} would leave the legal set family",
                detail={"budget": self.budget, "budget_used": len(self.queried)},
            )
        self.queried = self.queried | {edge_id}
        if response == REJECTED:
            self.rejected = self.rejected | {edge_id}
        self.history.append(
            {
                "edge_id": edge_id,
                "response": response,
                "timestamp": time.time() if timestamp is None else timestamp,
            }
        )
        return self.snapshot()

    def finalize(self) -> dict:
        """Apply the clearing policy to the accumulated responses; the
        session becomes read-only."""
        self._require_active()
        matching = self.current_matching()
        self.status = "finalized"
        return {
            "id": self.id,
            "status": self.status,
            "matching": matching,
            "expected_weight": matching["expected_weight"],
        }


class SessionStore:
    """Graph registry plus persistent session registry.

    Graph uploads and session event logs live under storage_dir; fixture
    graphs are always available under their well-known names.
    """

    def __init__(self, storage_dir: str | None = None):
        self.storage_dir = storage_dir
        self.graphs: dict[str, ExchangeGraph] = {
            name: build() for name, build in FIXTURE_GRAPHS.items()
        }
        self.fixture_names = set(self.graphs)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        if storage_dir:
            os.makedirs(os.path.join(storage_dir, "graphs"), exist_ok=True)
            os.makedirs(os.path.join(storage_dir, "sessions"), exist_ok=True)
            self._load_graphs()

    # -- graphs ---------------------------------------------------------------

    def _graph_path(self, graph_id: str) -> str:
        return os.path.join(self.storage_dir, "graphs", f"{graph_id}.json")

    def _load_graphs(self):
        directory = os.path.join(self.storage_dir, "graphs")
        for name in sorted(os.listdir(directory)):
            if name.endswith(".json"):
                graph_id = name[: -len(".json")]
                self.graphs[graph_id] = ExchangeGraph.load(os.path.join(directory, name))

    def add_graph(self, graph: ExchangeGraph, graph_id: str | None = None) -> str:
        graph_id = graph_id or f"upload-{uuid.uuid4().hex[:12]}"
        if graph_id in self.graphs:
            raise ConflictError(f"graph id {graph_id!r} already exists")
        self.graphs[graph_id] = graph
        if self.storage_dir:
            graph.save(self._graph_path(graph_id))
        return graph_id

    def get_graph(self, graph_id: str) -> ExchangeGraph:
        try:
            return self.graphs[graph_id]
        except KeyError:
            raise NotFoundError(f"no graph {graph_id!r}") from None

    def list_graphs(self) -> list[dict]:
        return [
            {
                "id": graph_id,
                "num_vertices": g.num_vertices,
                "num_edges": g.num_edges,
                "num_ndds": len(g.ndd_ids),
                "fixture": graph_id in self.fixture_names,
            }
            for graph_id, g in sorted(self.graphs.items())
        ]

    # -- sessions ---------------------------------------------------------------

    def _session_log_path(self, session_id: str) -> str:
        return os.path.join(self.storage_dir, "sessions", f"{session_id}.jsonl")

    def _append_event(self, session_id: str, event: dict):
        if not self.storage_dir:
            return
        with open(self._session_log_path(session_id), "a") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")

    def create_session(self, graph_id: str, config: dict) -> Session:
        graph = self.get_graph(graph_id)
        with self._lock:
            session_id = uuid.uuid4().hex[:16]
            session = Session(session_id, graph_id, graph, config)
            self.sessions[session_id] = session
        self._append_event(
            session_id,
            {"type": "created", "graph_id": graph_id, "config": config, "ts": time.time()},
        )
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            session = self._replay(session_id)
        if session is None:
            raise NotFoundError(f"no session {session_id!r}")
        return session

    def _replay(self, session_id: str) -> Session | None:
        """Rebuild a session from its event log (restart safety)."""
        if not self.storage_dir:
            return None
        path = self._session_log_path(session_id)
        if not os.path.exists(path):
            return None
        with open(path) as f:
            events = [json.loads(line) for line in f if line.strip()]
        if not events or events[0].get("type") != "created":
            return None
        created = events[0]
        session = Session(
            session_id, created["graph_id"], self.get_graph(created["graph_id"]), created["config"]
        )
        for event in events[1:]:
            if event["type"] == "response":
                session.record_response(
                    event["edge_id"], event["response"], timestamp=event["ts"]
                )
            elif event["type"] == "finalized":
                session.finalize()
        self.sessions[session_id] = session
        return session

    def record_response(self, session_id: str, edge_id: int, response: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            summary = session.record_response(edge_id, response)
            recorded_ts = session.history[-1]["timestamp"]
        self._append_event(
            session_id,
            {"type": "response", "edge_id": edge_id, "response": response, "ts": recorded_ts},
        )
        return summary

    def finalize(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            result = session.finalize()
        self._append_event(session_id, {"type": "finalized", "ts": time.time()})
        return result
