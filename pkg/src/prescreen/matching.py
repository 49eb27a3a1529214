"""Realized and expected matching weights, and exact clearing policies.

A matching is a vertex-disjoint set of enumerated cycles and chains. A dead
edge (rejected pre-match or failed post-match) kills its whole cycle; in a
chain it cuts off everything from the first dead edge on, and the surviving
prefix still counts (chains execute partially).

Two clearing policies are provided. The max-weight policy picks the matching
maximizing the rejection-adjusted nominal weight, ignoring post-match failure
probabilities; the failure-aware policy maximizes the expected post-failure
weight directly. Both are solved exactly by depth-first branch and bound over
structure inclusion, with a brute-force enumerator kept alongside as the
independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CYCLE, CycleChain
from .uncertainty import DistributionSpec, check_consistent

MAX_WEIGHT = "max_weight"
FAILURE_AWARE = "failure_aware"
POLICIES = (MAX_WEIGHT, FAILURE_AWARE)

BRUTE_FORCE_STRUCTURE_CAP = 20


@dataclass(frozen=True)
class Matching:
    """A vertex-disjoint selection of structures, stored as indices into the
    enumerated structure list plus the structures themselves."""

    selected: tuple[int, ...]
    structures: tuple[CycleChain, ...]
    nominal_weight: float

    def selection_vector(self, num_structures: int) -> np.ndarray:
        x = np.zeros(num_structures, dtype=np.int8)
        for i in self.selected:
            x[i] = 1
        return x

    def to_json_dict(self, expected_weight: float | None = None) -> dict:
        out = {
            "structures": [
                {
                    "index": i,
                    "kind": c.kind,
                    "edges": list(c.edges),
                    "vertices": list(c.vertices),
                    "nominal_weight": c.nominal_weight,
                }
                for i, c in zip(self.selected, self.structures)
            ],
            "nominal_weight": self.nominal_weight,
        }
        if expected_weight is not None:
            out["expected_weight"] = expected_weight
        return out


def _make_matching(structures, selected) -> Matching:
    return Matching(
        selected=tuple(selected),
        structures=tuple(structures[i] for i in selected),
        nominal_weight=float(sum(structures[i].nominal_weight for i in selected)),
    )


def realized_weight(structure: CycleChain, dead: np.ndarray) -> float:
    """Weight a structure actually delivers under a realized dead-edge vector
    (dead = rejections + failures, entrywise in {0, 1})."""
    if structure.kind == CYCLE:
        for e in structure.edges:
            if dead[e]:
                return 0.0
        return structure.nominal_weight
    total = 0.0
    for e, w in zip(structure.edges, structure.edge_weights):
        if dead[e]:
            break
        total += w
    return float(total)


def survival_probs(
    spec: DistributionSpec, queried: frozenset, rejected: frozenset
) -> np.ndarray:
    """Per-edge survival probability conditional on query set and observed
    rejections: 0 if rejected, p_success_queried if queried-and-accepted,
    p_success_unqueried otherwise."""
    s = spec.p_success_unqueried.copy()
    for e in queried:
        s[e] = spec.p_success_queried[e]
    for e in rejected:
        s[e] = 0.0
    return s


def _expected_weight_from_survival(structure: CycleChain, survival: np.ndarray) -> float:
    if structure.kind == CYCLE:
        prod = 1.0
        for e in structure.edges:
            prod *= survival[e]
        return float(structure.nominal_weight * prod)
    # telescoped first-dead-edge truncation: sum_k w_k * prod_{j<=k} s_j
    running = 1.0
    total = 0.0
    for e, w in zip(structure.edges, structure.edge_weights):
        running *= survival[e]
        total += w * running
    return float(total)


def expected_structure_weight(
    structure: CycleChain, spec: DistributionSpec, q: np.ndarray, r: np.ndarray
) -> float:
    """Expected delivered weight of one structure under independent edges."""
    q = np.asarray(q)
    r = np.asarray(r)
    check_consistent(q, r)
    s = survival_probs(
        spec,
        frozenset(int(e) for e in np.flatnonzero(q == 1)),
        frozenset(int(e) for e in np.flatnonzero(r == 1)),
    )
    return _expected_weight_from_survival(structure, s)


def post_match_expected_weight(
    matching: Matching, spec: DistributionSpec, q: np.ndarray, r: np.ndarray
) -> float:
    """Expected final weight of a matching: structures are vertex-disjoint,
    so their expectations add."""
    return float(
        sum(expected_structure_weight(c, spec, q, r) for c in matching.structures)
    )


def _mask_of(vertex_ids) -> int:
    mask = 0
    for v in vertex_ids:
        mask |= 1 << v
    return mask


class StructureTable:
    """Precomputed per-structure arrays for fast repeated evaluation.

    Holds, for every enumerated structure, its vertex bitmask (disjointness
    tests), nominal value, and the structures touching each edge, so a
    rejection scenario only re-values affected structures.
    """

    def __init__(self, structures):
        self.structures = tuple(structures)
        self.nominal = np.array([c.nominal_weight for c in self.structures])
        self.vertex_masks = [_mask_of(c.vertices) for c in self.structures]
        self.by_edge: dict[int, list[int]] = {}
        for i, c in enumerate(self.structures):
            for e in c.edges:
                self.by_edge.setdefault(e, []).append(i)
        self._components: list[list[int]] | None = None
        self._component_solvers: list[tuple] | None = None
        self._solve_cache: dict = {}

    def __len__(self) -> int:
        return len(self.structures)

    def conflict_components(self) -> list[list[int]]:
        """Connected components of the vertex-overlap graph on structures.

        Structures in different components can never conflict, so the
        max-value packing decomposes into independent per-component packings
        (a large win on sparse graphs, where most components are singletons).
        """
        if self._components is None:
            n = len(self.structures)
            parent = list(range(n))

            def find(i):
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            by_vertex: dict[int, int] = {}
            for i, c in enumerate(self.structures):
                for v in c.vertices:
                    if v in by_vertex:
                        ri, rj = find(i), find(by_vertex[v])
                        if ri != rj:
                            parent[max(ri, rj)] = min(ri, rj)
                    else:
                        by_vertex[v] = i
            groups: dict[int, list[int]] = {}
            for i in range(n):
                groups.setdefault(find(i), []).append(i)
            self._components = [groups[r] for r in sorted(groups)]
        return self._components

    def _solvers(self) -> list[tuple]:
        """Per-component solver tables: local vertex bits, per-structure
        local masks, and the structures at each local vertex.

        Local vertices are numbered in breadth-first order over the
        share-a-structure adjacency, so the mask recursion sweeps the tangle
        coherently and keeps the set of reachable memo states small.
        """
        if self._component_solvers is None:
            solvers = []
            for comp in self.conflict_components():
                vertices = sorted({v for i in comp for v in self.structures[i].vertices})
                neighbors: dict[int, set[int]] = {v: set() for v in vertices}
                for i in comp:
                    vs = self.structures[i].vertices
                    for a in vs:
                        neighbors[a].update(vs)
                order: list[int] = []
                seen: set[int] = set()
                for root in vertices:
                    if root in seen:
                        continue
                    queue = [root]
                    seen.add(root)
                    while queue:
                        v = queue.pop(0)
                        order.append(v)
                        for w in sorted(neighbors[v]):
                            if w not in seen:
                                seen.add(w)
                                queue.append(w)
                vbit = {v: k for k, v in enumerate(order)}
                local_masks = []
                at_vertex = [[] for _ in order]
                for li, i in enumerate(comp):
                    mask = 0
                    for v in self.structures[i].vertices:
                        mask |= 1 << vbit[v]
                        at_vertex[vbit[v]].append(li)
                    local_masks.append(mask)
                solvers.append((local_masks, at_vertex, (1 << len(order)) - 1))
            self._component_solvers = solvers
        return self._component_solvers

    @staticmethod
    def _solve_component(solver, values_local) -> tuple[list[int], float]:
        """Exact packing of one component by recursion on the lowest still
        free vertex, memoized over free-vertex masks.

        Each memo entry carries both the optimum value and the
        inclusion-preferring optimal selection (as a bitset over local
        indices): among equal-value candidates the one containing the
        smallest differing index wins, which composes correctly through the
        recursion because tied candidates always share the branch structure
        below their first differing member.
        """
        local_masks, at_vertex, full_mask = solver
        memo: dict[int, tuple[float, int]] = {0: (0.0, 0)}

        def best(mask: int) -> tuple[float, int]:
            hit = memo.get(mask)
            if hit is not None:
                return hit
            v = (mask & -mask).bit_length() - 1
            best_v, best_s = best(mask & ~(1 << v))  # leave v uncovered
            for li in at_vertex[v]:
                m = local_masks[li]
                if m & mask == m and values_local[li] >= 0:
                    sub_v, sub_s = best(mask & ~m)
                    cand_v = values_local[li] + sub_v
                    cand_s = sub_s | (1 << li)
                    if cand_v > best_v:
                        best_v, best_s = cand_v, cand_s
                    elif cand_v == best_v:
                        diff = cand_s ^ best_s
                        if diff and cand_s & (diff & -diff):
                            best_s = cand_s
            memo[mask] = (best_v, best_s)
            return best_v, best_s

        opt, bits = best(full_mask)
        sel = [li for li in range(len(local_masks)) if bits & (1 << li)]
        return sel, opt

    def solve_packing(self, values) -> tuple[tuple[int, ...], float]:
        """Exact max-value vertex-disjoint selection, component by component,
        reproducing exactly the flat solver's lexicographic tie-break.

        Per component the inclusion-preferring optimum is taken (ties keep
        every compatible zero-value structure); zero-value selections after
        the last positive-value index are then dropped, which is where the
        global tuple order prefers the shorter set. The result matches
        max_value_packing on every input while being far cheaper on sparse
        graphs. Component results are cached by their value pattern, which
        repeats heavily across rejection scenarios.
        """
        values = np.asarray(values, dtype=float)
        selected: list[int] = []
        for ci, comp in enumerate(self.conflict_components()):
            if len(comp) == 1:
                if values[comp[0]] >= 0:
                    selected.append(comp[0])
                continue
            values_local = values[comp]
            key = (ci, values_local.tobytes())
            hit = self._solve_cache.get(key)
            if hit is None:
                hit = self._solve_component(self._solvers()[ci], values_local)[0]
                self._solve_cache[key] = hit
            selected.extend(comp[i] for i in hit)
        selected.sort()
        last_positive = -1
        for i in selected:
            if values[i] > 0:
                last_positive = i
        kept = tuple(i for i in selected if i <= last_positive)
        return kept, float(sum(values[i] for i in kept))

    def affected_by(self, edge_ids) -> set[int]:
        hit: set[int] = set()
        for e in edge_ids:
            hit.update(self.by_edge.get(e, ()))
        return hit

    def f_values(self, rejected: frozenset) -> np.ndarray:
        """Rejection-adjusted nominal value of every structure (what the
        max-weight policy maximizes): cycles with a rejected edge are worth 0,
        chains keep their prefix weight before the first rejected edge."""
        values = self.nominal.copy()
        for i in self.affected_by(rejected):
            c = self.structures[i]
            if c.kind == CYCLE:
                if any(e in rejected for e in c.edges):
                    values[i] = 0.0
            else:
                total = 0.0
                for e, w in zip(c.edges, c.edge_weights):
                    if e in rejected:
                        break
                    total += w
                values[i] = total
        return values

    def expected_values(self, survival: np.ndarray, affected=None, base=None) -> np.ndarray:
        """Expected delivered weight of every structure; when a base vector
        (all edges unqueried) is supplied only the affected indices are
        recomputed."""
        if base is None:
            return np.array(
                [_expected_weight_from_survival(c, survival) for c in self.structures]
            )
        values = base.copy()
        for i in affected:
            values[i] = _expected_weight_from_survival(self.structures[i], survival)
        return values


def max_value_packing(vertex_masks, values) -> tuple[tuple[int, ...], float]:
    """Exact max-value vertex-disjoint selection by branch and bound.

    Structures are scanned in index order, include-branch first, keeping only
    strict improvements and pruning when the additive bound (current value
    plus all remaining positive values) cannot strictly beat the incumbent.
    The first optimum found this way is the lexicographically smallest
    optimal index set, which is the deterministic tie-break every caller
    relies on.
    """
    n = len(values)
    suffix_pos = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_pos[i] = suffix_pos[i + 1] + (values[i] if values[i] > 0 else 0.0)

    best_value = 0.0
    best_sel: tuple[int, ...] = ()
    sel: list[int] = []

    def dfs(i, used_mask, value):
        nonlocal best_value, best_sel
        if value > best_value:
            best_value = value
            best_sel = tuple(sel)
        if i == n or value + suffix_pos[i] <= best_value:
            return
        if not (vertex_masks[i] & used_mask):
            sel.append(i)
            dfs(i + 1, used_mask | vertex_masks[i], value + values[i])
            sel.pop()
        dfs(i + 1, used_mask, value)

    dfs(0, 0, 0.0)
    return best_sel, float(best_value)


def brute_force_packing(structures, values) -> Matching:
    """Independent oracle: enumerate every vertex-disjoint subset and return
    the max-value one, breaking ties by lexicographically smallest index set.
    Only intended for small instances."""
    structures = list(structures)
    values = list(values)
    if len(structures) > BRUTE_FORCE_STRUCTURE_CAP:
        raise ValueError(
            f"{len(structures)} structures exceeds the brute-force cap of "
            f"{BRUTE_FORCE_STRUCTURE_CAP}"
        )
    masks = [_mask_of(c.vertices) for c in structures]
    best: tuple[float, tuple[int, ...]] | None = None

    def enumerate_from(i, used_mask, value, sel):
        nonlocal best
        if i == len(structures):
            candidate = (value, tuple(sel))
            if (
                best is None
                or candidate[0] > best[0]
                or (candidate[0] == best[0] and candidate[1] < best[1])
            ):
                best = candidate
            return
        if not (masks[i] & used_mask):
            sel.append(i)
            enumerate_from(i + 1, used_mask | masks[i], value + values[i], sel)
            sel.pop()
        enumerate_from(i + 1, used_mask, value, sel)

    enumerate_from(0, 0, 0.0, [])
    return _make_matching(structures, best[1])


def solve_policy(
    policy: str,
    structures,
    spec: DistributionSpec,
    q: np.ndarray,
    r: np.ndarray,
) -> Matching:
    """Exact clearing under the given policy for observed rejections r.

    max_weight maximizes the rejection-adjusted nominal weight (post-match
    failures are not anticipated; chains truncated by a rejection count their
    surviving prefix); failure_aware maximizes the summed expected delivered
    weight. Returns the empty matching when no structures exist.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    q = np.asarray(q)
    r = np.asarray(r)
    check_consistent(q, r)
    structures = list(structures)
    table = StructureTable(structures)
    queried = frozenset(int(e) for e in np.flatnonzero(q == 1))
    rejected = frozenset(int(e) for e in np.flatnonzero(r == 1))
    if policy == MAX_WEIGHT:
        values = table.f_values(rejected)
    else:
        values = table.expected_values(survival_probs(spec, queried, rejected))
    selected, _ = table.solve_packing(values)
    return _make_matching(structures, selected)
