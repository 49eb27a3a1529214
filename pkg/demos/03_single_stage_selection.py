"""Choosing a screening budget's worth of edges, all at once.

Compares random, greedy, tree-search, and exhaustive selection on seeded
random graphs and reports the relative gain over the no-screening baseline.
"""

import numpy as np

from prescreen import enumerate_structures, generate_random_graph, make_simple
from prescreen.matching import MAX_WEIGHT
from prescreen.selection import (
    LegalEdgeSets,
    MctsConfig,
    ObjectiveEvaluator,
    exhaustive_opt,
    greedy_single_stage,
    mcts_single_stage,
)

BUDGET = 3


def main():
    rows = []
    for seed in range(8):
        graph = generate_random_graph(n=50, p=0.01, seed=seed)
        structures = enumerate_structures(graph)
        if not structures:
            continue
        spec = make_simple(graph)
        legal = LegalEdgeSets(graph, budget=BUDGET)
        ev = ObjectiveEvaluator(graph, structures, spec, MAX_WEIGHT)
        baseline = ev.value(())

        rng = np.random.default_rng(seed)
        random_pick = tuple(sorted(rng.permutation(graph.num_edges)[:BUDGET].tolist()))
        greedy = greedy_single_stage(ev, legal)
        searched = mcts_single_stage(
            ev, legal, MctsConfig(lookahead=2, iterations_per_level=500, seed=seed)
        )
        opt = exhaustive_opt(ev, legal)

        def delta(v):
            return (v - baseline) / baseline

        rows.append((seed, delta(ev.value(random_pick)), delta(greedy.value),
                     delta(searched.value), delta(opt.value)))
        print(f"seed {seed}: baseline {baseline:6.3f} | gain: "
              f"random {rows[-1][1]:+.3f}  greedy {rows[-1][2]:+.3f}  "
              f"search {rows[-1][3]:+.3f}  optimal {rows[-1][4]:+.3f}"
              f"   greedy picked {greedy.query_set}")

    med = np.median(np.array([r[1:] for r in rows]), axis=0)
    print(f"\nmedian gains over {len(rows)} graphs: random {med[0]:+.3f}, "
          f"greedy {med[1]:+.3f}, search {med[2]:+.3f}, optimal {med[3]:+.3f}")
    print("greedy is near-optimal here, at a tiny fraction of exhaustive cost")


if __name__ == "__main__":
    main()
