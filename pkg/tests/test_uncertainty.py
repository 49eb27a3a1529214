import numpy as np
import pytest

from prescreen.graph import generate_random_graph
from prescreen.uncertainty import (
    DistributionSpec,
    as_bits,
    check_assumption_1,
    enumerate_rejection_scenarios,
    make_kpd,
    make_simple,
    overall_death_probability,
    sample_failures,
    sample_rejections,
)

# the distribution that motivates the monotonicity assumption check: queried
# edges always accepted but then fail half the time, unqueried edges almost
# never fail, so querying is strictly harmful
HARMFUL = dict(p_reject=0.0, p_success_queried=0.5, p_success_unqueried=0.9)


def harmful_spec(m=3):
    return DistributionSpec(
        p_reject=np.full(m, HARMFUL["p_reject"]),
        p_success_queried=np.full(m, HARMFUL["p_success_queried"]),
        p_success_unqueried=np.full(m, HARMFUL["p_success_unqueried"]),
    )


def test_simple_spec_values(bridge_graph, bridge_simple):
    assert bridge_simple.num_edges == bridge_graph.num_edges == 8
    for e in range(8):
        probs = bridge_simple.edge_probs(e)
        assert (probs.p_reject, probs.p_success_queried, probs.p_success_unqueried) == (
            0.5,
            1.0,
            0.5,
        )


def test_simple_spec_on_empty_graph():
    from prescreen.graph import ExchangeGraph

    spec = make_simple(ExchangeGraph([], []))
    assert spec.num_edges == 0


def test_kpd_ranges_and_determinism():
    graph = generate_random_graph(40, 0.1, seed=5)
    high_risk = {0, 3, 7}
    spec = make_kpd(graph, high_risk, seed=42)
    again = make_kpd(graph, high_risk, seed=42)
    assert np.array_equal(spec.p_reject, again.p_reject)
    assert np.array_equal(spec.p_success_queried, again.p_success_queried)
    for e in range(spec.num_edges):
        assert 0.25 <= spec.p_reject[e] <= 0.43
        if e in high_risk:
            assert 0.2 <= spec.p_success_queried[e] <= 0.5
            assert 0.0 <= spec.p_success_unqueried[e] <= 0.2
        else:
            assert 0.9 <= spec.p_success_queried[e] <= 1.0
            assert 0.8 <= spec.p_success_unqueried[e] <= 0.9
    assert spec.provenance["kind"] == "kpd"
    assert spec.provenance["high_risk"] == sorted(high_risk)


def test_kpd_rejects_unknown_high_risk_edges():
    graph = generate_random_graph(10, 0.2, seed=1)
    with pytest.raises(ValueError):
        make_kpd(graph, {graph.num_edges + 5}, seed=0)


def test_kpd_mean_rejection_rate():
    # mean p_reject over ~1e5 edges vs the uniform mean 0.34
    graph = generate_random_graph(317, 1.0, seed=0)
    assert graph.num_edges == 317 * 316
    spec = make_kpd(graph, set(), seed=9)
    se = (0.43 - 0.25) / np.sqrt(12) / np.sqrt(spec.num_edges)
    assert abs(spec.p_reject.mean() - 0.34) <= 3 * se


def test_sampling_without_queries_never_rejects(bridge_simple):
    q = np.zeros(8, dtype=np.int8)
    for scenario in range(50):
        r = sample_rejections(bridge_simple, q, seed=0, scenario=scenario)
        assert not r.any()


def test_rejection_frequency_matches_probability(bridge_simple):
    q = as_bits([0, 2, 5, 7], 8)
    draws = 100_000
    totals = np.zeros(8)
    for scenario in range(draws):
        totals += sample_rejections(bridge_simple, q, seed=3, scenario=scenario)
    freq = totals / draws
    se = np.sqrt(0.5 * 0.5 / draws)
    for e in [0, 2, 5, 7]:
        assert abs(freq[e] - 0.5) <= 3 * se
    for e in [1, 3, 4, 6]:
        assert freq[e] == 0.0


def test_rejections_imply_queried(bridge_simple):
    q = as_bits([1, 4, 6], 8)
    for scenario in range(200):
        r = sample_rejections(bridge_simple, q, seed=7, scenario=scenario)
        assert not np.any((r == 1) & (q == 0))


def test_zero_rejection_probability_edge_never_rejected():
    spec = harmful_spec(4)  # p_reject = 0 everywhere
    q = np.ones(4, dtype=np.int8)
    for scenario in range(100):
        assert not sample_rejections(spec, q, seed=1, scenario=scenario).any()


def test_sampling_is_deterministic(bridge_simple):
    q = as_bits([0, 5], 8)
    a = sample_rejections(bridge_simple, q, seed=11, scenario=4)
    b = sample_rejections(bridge_simple, q, seed=11, scenario=4)
    assert np.array_equal(a, b)
    f1 = sample_failures(bridge_simple, q, a, seed=11, scenario=4)
    f2 = sample_failures(bridge_simple, q, a, seed=11, scenario=4)
    assert np.array_equal(f1, f2)


def test_enlarging_query_set_keeps_other_edges_draws(bridge_simple):
    # common random numbers: adding an edge to q must not change other edges
    small = as_bits([0], 8)
    large = as_bits([0, 5, 7], 8)
    for scenario in range(100):
        r_small = sample_rejections(bridge_simple, small, seed=2, scenario=scenario)
        r_large = sample_rejections(bridge_simple, large, seed=2, scenario=scenario)
        assert r_small[0] == r_large[0]


def test_accepted_edges_with_certain_success_never_fail(bridge_simple):
    q = as_bits([0, 2], 8)
    r = np.zeros(8, dtype=np.int8)
    for scenario in range(100):
        f = sample_failures(bridge_simple, q, r, seed=5, scenario=scenario)
        assert f[0] == 0 and f[2] == 0  # p_success_queried is 1


def test_unqueried_failure_frequency(bridge_simple):
    q = np.zeros(8, dtype=np.int8)
    r = np.zeros(8, dtype=np.int8)
    draws = 100_000
    total = 0
    for scenario in range(draws):
        total += int(sample_failures(bridge_simple, q, r, seed=6, scenario=scenario)[3])
    se = np.sqrt(0.5 * 0.5 / draws)
    assert abs(total / draws - 0.5) <= 3 * se


def test_rejected_edges_never_fail(bridge_simple):
    q = as_bits([1], 8)
    r = as_bits([1], 8)
    for scenario in range(100):
        assert sample_failures(bridge_simple, q, r, seed=8, scenario=scenario)[1] == 0


def test_inconsistent_rejections_raise(bridge_simple):
    q = np.zeros(8, dtype=np.int8)
    r = as_bits([3], 8)
    with pytest.raises(ValueError):
        sample_failures(bridge_simple, q, r, seed=0)


def test_scenario_enumeration_empty_query(bridge_simple):
    scenarios = enumerate_rejection_scenarios(bridge_simple, np.zeros(8, dtype=np.int8))
    assert len(scenarios) == 1
    assert scenarios[0].probability == 1.0
    assert not scenarios[0].rejections.any()


def test_scenario_enumeration_uniform_probabilities(bridge_simple):
    scenarios = enumerate_rejection_scenarios(bridge_simple, as_bits([0, 2, 5], 8))
    assert len(scenarios) == 8
    for s in scenarios:
        assert s.probability == pytest.approx(1 / 8)
    assert sum(s.probability for s in scenarios) == pytest.approx(1.0, abs=1e-12)


def test_scenario_enumeration_single_biased_edge():
    spec = DistributionSpec([0.25], [0.9], [0.8])
    scenarios = enumerate_rejection_scenarios(spec, np.array([1], dtype=np.int8))
    by_bit = {int(s.rejections[0]): s.probability for s in scenarios}
    assert by_bit[1] == pytest.approx(0.25)
    assert by_bit[0] == pytest.approx(0.75)


def test_scenario_probabilities_sum_to_one_for_random_specs():
    rng = np.random.default_rng(0)
    for trial in range(20):
        m = int(rng.integers(1, 9))
        spec = DistributionSpec(
            rng.uniform(0, 1, m), rng.uniform(0, 1, m), rng.uniform(0, 1, m)
        )
        q = (rng.random(m) < 0.7).astype(np.int8)
        scenarios = enumerate_rejection_scenarios(spec, q)
        assert sum(s.probability for s in scenarios) == pytest.approx(1.0, abs=1e-12)


def test_scenario_enumeration_cap(bridge_graph):
    graph = generate_random_graph(30, 0.2, seed=0)
    spec = make_simple(graph)
    q = as_bits(range(11), graph.num_edges)
    with pytest.raises(ValueError, match="sampling"):
        enumerate_rejection_scenarios(spec, q)


def test_sampled_frequencies_match_enumerated_probabilities(bridge_simple):
    q = as_bits([0, 2, 5], 8)
    scenarios = enumerate_rejection_scenarios(bridge_simple, q)
    draws = 100_000
    counts = {tuple(s.rejections): 0 for s in scenarios}
    for scenario in range(draws):
        counts[tuple(sample_rejections(bridge_simple, q, seed=13, scenario=scenario))] += 1
    for s in scenarios:
        freq = counts[tuple(s.rejections)] / draws
        se = np.sqrt(s.probability * (1 - s.probability) / draws)
        assert abs(freq - s.probability) <= 3 * se


def test_overall_death_probability_simple(bridge_simple):
    # queried: 0.5 + 0.5 * 0 = 0.5; unqueried: 1 - 0.5 = 0.5 (equality case)
    assert overall_death_probability(bridge_simple, 0, queried=True) == pytest.approx(0.5)
    assert overall_death_probability(bridge_simple, 0, queried=False) == pytest.approx(0.5)


def test_overall_death_probability_harmful_distribution():
    spec = harmful_spec()
    assert overall_death_probability(spec, 0, queried=True) == pytest.approx(0.5)
    assert overall_death_probability(spec, 0, queried=False) == pytest.approx(0.1)


def test_overall_death_probability_perfect_edge():
    spec = DistributionSpec([0.0], [1.0], [0.7])
    assert overall_death_probability(spec, 0, queried=True) == 0.0


def test_assumption_check_passes_simple(bridge_simple):
    assert check_assumption_1(bridge_simple).ok


def test_assumption_check_fails_harmful_distribution():
    result = check_assumption_1(harmful_spec(3))
    assert not result.ok
    assert result.violations == (0, 1, 2)


def test_assumption_check_reports_kpd_edges_per_direct_arithmetic():
    graph = generate_random_graph(25, 0.1, seed=3)
    spec = make_kpd(graph, {0}, seed=17)
    result = check_assumption_1(spec)
    expected = tuple(
        e
        for e in range(spec.num_edges)
        if spec.p_reject[e] + (1 - spec.p_reject[e]) * (1 - spec.p_success_queried[e])
        > 1 - spec.p_success_unqueried[e] + 1e-12
    )
    assert result.violations == expected
    assert result.ok == (not expected)


def test_spec_json_round_trip(bridge_simple, tmp_path):
    path = tmp_path / "dist.json"
    bridge_simple.save(path)
    loaded = DistributionSpec.load(path)
    assert np.array_equal(loaded.p_reject, bridge_simple.p_reject)
    assert loaded.provenance == bridge_simple.provenance


def test_spec_json_requires_full_coverage():
    with pytest.raises(ValueError):
        DistributionSpec.from_json_dict(
            {"edges": {"0": {"p_reject": 0.1, "p_success_queried": 1.0, "p_success_unqueried": 0.5},
                        "2": {"p_reject": 0.1, "p_success_queried": 1.0, "p_success_unqueried": 0.5}}}
        )


def test_spec_rejects_out_of_range_probabilities():
    with pytest.raises(ValueError):
        DistributionSpec([1.5], [0.5], [0.5])
