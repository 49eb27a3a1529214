"""Pre-screening (edge query) planning for kidney exchange clearing.

Given an exchange graph, per-edge rejection/failure probabilities, and a
fixed clearing policy, this package chooses a budgeted set of potential
transplants to pre-screen, either all at once or one at a time with feedback,
so as to maximize the expected final matching weight. It also ships the
simulation harness used to benchmark the selection methods and an HTTP
service for running a live pre-screening session.
"""

from .graph import (
    CHAIN,
    CYCLE,
    NDD,
    PAIR,
    CycleChain,
    Edge,
    ExchangeGraph,
    GraphValidationError,
    Vertex,
    enumerate_structures,
    generate_random_graph,
    validate_graph,
)
from .matching import (
    FAILURE_AWARE,
    MAX_WEIGHT,
    Matching,
    brute_force_packing,
    expected_structure_weight,
    post_match_expected_weight,
    realized_weight,
    solve_policy,
)
from .selection import (
    EvalConfig,
    LegalEdgeSets,
    MctsConfig,
    ObjectiveEvaluator,
    children,
    exhaustive_opt,
    greedy_next_edge,
    greedy_single_stage,
    mcts_next_edge,
    mcts_single_stage,
    objective_single_stage,
    ucb_score,
)
from .uncertainty import (
    DistributionSpec,
    EdgeProbabilities,
    check_assumption_1,
    enumerate_rejection_scenarios,
    make_kpd,
    make_simple,
    overall_death_probability,
    sample_failures,
    sample_rejections,
)

__all__ = [name for name in dir() if not name.startswith("_")]
