"""Small hand-built exchange graphs used by tests, demos, and the service.

Both fixtures are classic stress shapes for edge querying: one where three
cycles interlock so that screening a single bridge edge can make the final
expected matching weight worse, and one where an altruist chain threads
through two 2-cycles so rejecting its first edge strands the whole chain.
"""

from __future__ import annotations

from .graph import NDD, PAIR, Edge, ExchangeGraph, Vertex


def interlocking_cycles_graph() -> ExchangeGraph:
    """Six pairs forming three interlocking cycles.

    A 2-cycle (A, B), a 3-cycle (B, C, E) whose closing edge weighs 1.5, and
    a 3-cycle (C, D, F). The 2-cycle and the (C, D, F) cycle are disjoint and
    together outweigh the middle cycle, so the max-weight policy takes them
    both; but once the (C, D) edge is rejected the middle cycle becomes the
    best option and blocks the 2-cycle. Querying (C, D) alone thus lowers the
    expected outcome, and querying combinations of the labelled edges is
    strongly complementary. Vertices 0..5 correspond to A..F.
    """
    vertices = [Vertex(id=i, kind=PAIR) for i in range(6)]
    a, b, c, d, e, f = range(6)
    edges = [
        Edge(id=0, source=a, target=b),              # bridge into the 2-cycle
        Edge(id=1, source=b, target=a),
        Edge(id=2, source=b, target=c),              # entry to the middle cycle
        Edge(id=3, source=c, target=e),
        Edge(id=4, source=e, target=b, weight=1.5),  # the heavy closing edge
        Edge(id=5, source=c, target=d),              # bridge into the right cycle
        Edge(id=6, source=d, target=f),
        Edge(id=7, source=f, target=c),
    ]
    return ExchangeGraph(vertices, edges)


def chain_and_cycles_graph() -> ExchangeGraph:
    """An altruist chain n -> p1 -> p2 -> p3 threaded through two 2-cycles
    (p1, p4) and (p2, p5). Rejecting the altruist's first edge kills every
    chain, leaving only the cycles matchable. Vertex 0 is the altruist."""
    vertices = [Vertex(id=0, kind=NDD)] + [Vertex(id=i, kind=PAIR) for i in range(1, 6)]
    edges = [
        Edge(id=0, source=0, target=1),  # the chain-triggering edge
        Edge(id=1, source=1, target=2),
        Edge(id=2, source=2, target=3),
        Edge(id=3, source=1, target=4),
        Edge(id=4, source=4, target=1),
        Edge(id=5, source=2, target=5),
        Edge(id=6, source=5, target=2),
    ]
    return ExchangeGraph(vertices, edges)


FIXTURE_GRAPHS = {
    "interlocking-cycles": interlocking_cycles_graph,
    "chain-and-cycles": chain_and_cycles_graph,
}
