"""The value of pre-screening, and why choosing what to screen is tricky.

Walks the interlocking-cycles graph: screening the bridge edge into the
right cycle makes the expected outcome WORSE under the max-weight policy
(the policy reroutes to the heavy middle cycle whenever the bridge is
rejected, blocking the 2-cycle), while screening the two left edges together
is worth far more than their separate one-at-a-time gains.
"""

from fractions import Fraction

from prescreen import enumerate_structures, make_simple
from prescreen.fixtures import interlocking_cycles_graph
from prescreen.matching import MAX_WEIGHT
from prescreen.selection import EvalConfig, ObjectiveEvaluator

TWO_CYCLE, MIDDLE, RIGHT = 0, 2, 5  # the three decision-relevant edges


def frac(x):
    return Fraction(x).limit_denominator(10**6)


def main():
    graph = interlocking_cycles_graph()
    structures = enumerate_structures(graph)
    spec = make_simple(graph)
    ev = ObjectiveEvaluator(graph, structures, spec, MAX_WEIGHT)

    base = ev.value(())
    print(f"no screening:                      V = {frac(base)}")

    hurt = ev.value((RIGHT,))
    print(f"screen the right bridge alone:     V = {frac(hurt)}   "
          f"({'WORSE' if hurt < base else 'better'} than doing nothing)")

    print("\nall subsets of the three labelled edges:")
    for q in [(), (TWO_CYCLE,), (MIDDLE,), (RIGHT,), (TWO_CYCLE, MIDDLE),
              (TWO_CYCLE, RIGHT), (MIDDLE, RIGHT), (TWO_CYCLE, MIDDLE, RIGHT)]:
        print(f"   screen {str(set(q)) if q else '{}':12s} V = {str(frac(ev.value(q))):7s}"
              f" = {ev.value(q):.6f}")

    v_all = ev.value((TWO_CYCLE, MIDDLE, RIGHT))
    v_05 = ev.value((TWO_CYCLE, RIGHT))
    v_25 = ev.value((MIDDLE, RIGHT))
    print("\ncomplementarity (superadditive marginal gains on top of the bridge):")
    print(f"   V(all three) + V(bridge) = {frac(v_all + hurt)}")
    print(f"   V(0,5) + V(2,5)          = {frac(v_05 + v_25)}  (strictly smaller)")

    sampled = ObjectiveEvaluator(
        graph, structures, spec, MAX_WEIGHT,
        EvalConfig(exact_cap=0, samples=20000, seed=1),
    )
    est = sampled.value((TWO_CYCLE, MIDDLE, RIGHT))
    print(f"\nsampled estimate of V(all three) at 20000 scenarios: {est:.6f} "
          f"(exact {v_all:.6f})")


if __name__ == "__main__":
    main()
