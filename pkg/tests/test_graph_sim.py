import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from contagion_tda.errors import ConfigError, InputError
from contagion_tda.graph_sim import (
    GROUP_FRACTIONS,
    AgentProfile,
    CascadeConfig,
    SocialGraph,
    assign_profiles,
    generate_graph,
    read_edges_csv,
    read_return_matrix_csv,
    run_cascade,
    simulate_benchmark,
    simulate_returns,
    write_edges_csv,
    write_return_matrix_csv,
)


def path_graph(q_a):
    g = SocialGraph(2, [(0, 1)])
    return g, np.array([q_a, 0.0])


def test_smallest_graph():
    g = generate_graph(2, 0, 1, seed=0)
    assert sorted(map(tuple, g.edges.tolist())) == [(0, 1), (1, 0)]


def test_giant_component_and_isolated_block():
    g = generate_graph(100, 10, 2, seed=3)
    assert g.node_count == 110
    assert g.isolated_ids == frozenset(range(100, 110))
    ref = nx.Graph()
    ref.add_nodes_from(range(110))
    ref.add_edges_from(g.edges.tolist())
    oracle = sorted(len(c) for c in nx.connected_components(ref))
    assert sorted(len(c) for c in g.weak_components()) == oracle
    assert oracle[-1] == 100 and oracle.count(1) == 10


def test_full_scale_graph():
    g = generate_graph(1703, 127, 2, seed=1)
    assert g.node_count == 1830
    assert len(g.isolated_ids) == 127
    assert g.is_symmetric()


def test_graph_invariants():
    g = generate_graph(50, 5, 3, seed=2)
    assert not np.any(g.edges[:, 0] == g.edges[:, 1])
    assert g.edges.max() < g.node_count
    assert not set(g.edges.ravel().tolist()) & g.isolated_ids


@pytest.mark.parametrize("args", [(1, 0, 1), (10, -1, 1), (10, 0, 0)])
def test_invalid_sizes(args):
    with pytest.raises(ConfigError):
        generate_graph(*args, seed=0)


def test_rejects_bad_edges():
    with pytest.raises(InputError):
        SocialGraph(2, [(0, 0)])
    with pytest.raises(InputError):
        SocialGraph(2, [(0, 2)])
    with pytest.raises(InputError):
        SocialGraph(3, [(0, 1)], frozenset({1}))


def test_degenerate_fractions():
    fr = np.zeros((3, 3))
    fr[2, 2] = 1.0
    g = generate_graph(200, 0, 2, seed=0)
    profiles = assign_profiles(g, CascadeConfig(group_fractions=fr), seed=1)
    assert all(p.spread_class == "Q3" and p.behavior_class == "Opportunistic" for p in profiles)
    assert all(0.4 <= p.spread_prob <= 0.6 and 0.5 <= p.act_prob <= 0.8 for p in profiles)


def test_cell_frequencies_match_table():
    g = SocialGraph(100_000, np.zeros((0, 2)))
    profiles = assign_profiles(g, CascadeConfig(), seed=5)
    classes = [(p.spread_class, p.behavior_class) for p in profiles]
    cells = [(s, b) for s in ("Q1", "Q2", "Q3") for b in ("Passive", "Neutral", "Opportunistic")]
    counts = np.array([classes.count(c) for c in cells])
    passive = sum(1 for p in profiles if p.behavior_class == "Passive") / len(profiles)
    assert abs(passive - (0.25 + 0.15 + 0.05)) < 0.01
    chi = stats.chisquare(counts, GROUP_FRACTIONS.ravel() * len(profiles))
    assert chi.pvalue > 0.01


def test_isolated_agents_never_informed():
    graph, profiles, rm = simulate_benchmark(n_core=60, n_isolated=8, attach_param=3, runs=50, seed=2)
    iso = sorted(graph.isolated_ids)
    assert not rm.informed_mask[iso].any()
    assert all(profiles[i].behavior_class == "Passive" for i in iso)


def test_certain_and_impossible_transmission():
    rng = np.random.default_rng(0)
    g, q = path_graph(1.0)
    assert all(run_cascade(g, q, {0}, rng) == {0, 1} for _ in range(50))
    g, q = path_graph(0.0)
    assert all(run_cascade(g, q, {0}, rng) == {0} for _ in range(50))


def test_bernoulli_transmission_rate():
    g, q = path_graph(0.5)
    rng = np.random.default_rng(11)
    hits = sum(1 in run_cascade(g, q, {0}, rng) for _ in range(100_000))
    assert abs(hits / 100_000 - 0.5) < 0.01


def test_seed_outside_graph():
    g, q = path_graph(0.5)
    with pytest.raises(InputError):
        run_cascade(g, q, {5}, np.random.default_rng(0))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 25),
    data=st.data(),
)
def test_informed_set_contains_seeds_and_stays_connected(n, data):
    pairs = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))
    edges = sorted({(a, b) for a, b in pairs if a != b})
    touched = {x for e in edges for x in e}
    g = SocialGraph(n, edges, frozenset(i for i in range(n) if i not in touched))
    q = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    seeds = set(data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=3)))
    out = run_cascade(g, q, seeds, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    assert seeds <= out
    reach = nx.DiGraph()
    reach.add_nodes_from(range(n))
    reach.add_edges_from(edges)
    reachable = set(seeds).union(*(nx.descendants(reach, s) for s in seeds))
    assert out <= reachable


def test_adding_edge_does_not_shrink_spread():
    base = SocialGraph(4, [(0, 1), (1, 2)])
    more = SocialGraph(4, [(0, 1), (1, 2), (0, 3)])
    q = np.array([0.5, 0.5, 0.5, 0.5])
    runs = 20_000
    sizes = []
    for g in (base, more):
        rng = np.random.default_rng(7)
        sizes.append(np.array([len(run_cascade(g, q, {0}, rng)) for _ in range(runs)]))
    diff = sizes[1].mean() - sizes[0].mean()
    se = np.sqrt(sizes[0].var() / runs + sizes[1].var() / runs)
    assert diff > -3 * se
    assert diff > 0.4  # the new edge alone adds 0.5 in expectation


def test_matrix_shape_and_determinism():
    a = simulate_benchmark(n_core=80, n_isolated=5, attach_param=3, runs=30, seed=9)[2]
    b = simulate_benchmark(n_core=80, n_isolated=5, attach_param=3, runs=30, seed=9)[2]
    assert a.values.shape == (85, 60)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.truth, b.truth)
    c = simulate_benchmark(n_core=80, n_isolated=5, attach_param=3, runs=30, seed=10)[2]
    assert not np.array_equal(a.values, c.values)


def test_no_uninformed_trading_leaves_baseline_block_empty():
    graph, profiles, rm = simulate_benchmark(n_core=40, n_isolated=3, attach_param=2, runs=20, seed=1, p_uninformed=0.0)
    assert np.all(rm.values[:, 20:] == 0.0)


def test_informed_returns_have_configured_mean():
    g = SocialGraph(2, [(0, 1)])
    profiles = [AgentProfile("Q1", "Opportunistic", 0.0, 1.0), AgentProfile("Q1", "Passive", 0.0, 0.0)]
    cfg = CascadeConfig(runs_per_model=4000, seed_agents=({0},), p_uninformed=0.0, seed=3)
    rm = simulate_returns(g, profiles, cfg)
    pre = rm.values[0, :4000]
    assert np.all(pre != 0)
    assert abs(pre.mean() - 0.003) < 4 * 0.0015 / np.sqrt(4000)


def test_opportunistic_count_at_full_scale():
    graph, profiles, rm = simulate_benchmark(runs=2, seed=0)
    assert rm.values.shape == (1830, 4)
    assert 270 <= len(rm.opportunistic) <= 345


def test_board_seeds_must_be_connected():
    g = generate_graph(10, 2, 2, seed=0)
    profiles = assign_profiles(g, CascadeConfig(), seed=0)
    with pytest.raises(InputError):
        simulate_returns(g, profiles, CascadeConfig(runs_per_model=2, seed_agents=({10},)))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"group_fractions": np.full((3, 3), 0.2)},
        {"informed_return": (0.003, 0.0)},
        {"runs_per_model": 0},
        {"p_uninformed": 1.5},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        CascadeConfig(**kwargs)


def test_csv_round_trips(tmp_path):
    graph, profiles, rm = simulate_benchmark(n_core=30, n_isolated=4, attach_param=2, runs=5, seed=4)
    write_edges_csv(graph, tmp_path / "edges.csv")
    back = read_edges_csv(tmp_path / "edges.csv", graph.node_count)
    assert np.array_equal(back.edges, graph.edges) and back.isolated_ids == graph.isolated_ids
    write_return_matrix_csv(rm, tmp_path / "returns.csv")
    header = (tmp_path / "returns.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["agent_id", "label", "r_pre_1"] and header[-1] == "r_base_5"
    rm2 = read_return_matrix_csv(tmp_path / "returns.csv")
    assert np.array_equal(rm2.values, rm.values) and np.array_equal(rm2.truth, rm.truth)


def test_trading_series_shift_only_inside_windows():
    from contagion_tda.graph_sim import simulate_trading_series

    s = simulate_trading_series("a", "C", "Opportunistic", True, n_days=4000, seed=0)
    assert s.is_active and s.n_pre == 2000
    assert np.all(s.profits / s.returns > 0)  # profit is return times a positive volume
    base = s.returns[~s.pre_mask]
    assert abs(base.mean() - 0.0005) < 4 * 0.0015 / np.sqrt(len(base))
    # act probability in (0.5, 0.8) moves the pre mean to 0.0005 + act * 0.0025
    lift = (s.returns[s.pre_mask].mean() - 0.0005) / 0.0025
    assert 0.45 < lift < 0.85
    plain = simulate_trading_series("a", "C", "Passive", False, n_days=4000, seed=0)
    assert abs(plain.returns[plain.pre_mask].mean() - 0.0005) < 4 * 0.0015 / np.sqrt(2000)


def test_trading_series_validation():
    from contagion_tda.graph_sim import simulate_trading_series

    with pytest.raises(ConfigError):
        simulate_trading_series("a", "C", "Greedy")
    with pytest.raises(ConfigError):
        simulate_trading_series("a", "C", pre_fraction=1.0)


def test_power_panel_shape_and_determinism():
    from contagion_tda.graph_sim import simulate_power_panel

    opp, pools = simulate_power_panel(5, 3, True, seed=2, n_days=50)
    assert len(opp) == 5 and all(len(p) == 3 for p in pools)
    assert all(r.company_id == o.company_id for o, p in zip(opp, pools) for r in p)
    again, _ = simulate_power_panel(5, 3, True, seed=2, n_days=50)
    assert all(np.array_equal(a.returns, b.returns) for a, b in zip(opp, again))
    placebo, _ = simulate_power_panel(5, 3, False, seed=2, n_days=50)
    assert not np.array_equal(placebo[0].returns, opp[0].returns)
    with pytest.raises(ConfigError):
        simulate_power_panel(1)
