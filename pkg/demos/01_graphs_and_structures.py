"""Exchange graphs and their matchable structures.

Builds the two bundled demo graphs and a seeded random graph, then shows the
cycle/chain enumeration that every other capability is built on.
"""

from prescreen import enumerate_structures, generate_random_graph, validate_graph
from prescreen.fixtures import chain_and_cycles_graph, interlocking_cycles_graph


def describe(name, graph):
    structures = enumerate_structures(graph, max_cycle_len=3, max_chain_len=3)
    print(f"\n== {name}: {graph.num_vertices} vertices, {graph.num_edges} edges, "
          f"{len(graph.ndd_ids)} altruists, {len(structures)} structures")
    for c in structures:
        arrows = " -> ".join(str(v) for v in c.vertices)
        if c.kind == "cycle":
            arrows += f" -> {c.vertices[0]}"
        print(f"   {c.kind:5s} weight {c.nominal_weight:<4} {arrows}")


def main():
    bridge = interlocking_cycles_graph()
    assert validate_graph(bridge) == []
    describe("interlocking cycles", bridge)

    chain = chain_and_cycles_graph()
    describe("altruist chain threading two 2-cycles", chain)

    random_graph = generate_random_graph(n=50, p=0.01, seed=7)
    structures = enumerate_structures(random_graph)
    print(f"\n== seeded random graph (n=50, p=0.01, seed=7): "
          f"{random_graph.num_edges} edges, {len(random_graph.ndd_ids)} altruists, "
          f"{len(structures)} structures")
    kinds = {}
    for c in structures:
        kinds[(c.kind, len(c))] = kinds.get((c.kind, len(c)), 0) + 1
    for (kind, length), count in sorted(kinds.items()):
        print(f"   {count:3d} {kind}s of length {length}")


if __name__ == "__main__":
    main()
