import numpy as np
import pytest

from contagion_tda.errors import ConfigError, InputError
from contagion_tda.graph_sim import simulate_benchmark, simulate_power_panel, simulate_trading_series
from contagion_tda.market_data import AgentReturnSeries
from contagion_tda.pipeline import pair_diagrams, pair_models, pair_statistic, power_check, run_benchmark


def test_benchmark_rows_share_ground_truth():
    _, _, rm = simulate_benchmark(n_core=150, n_isolated=10, attach_param=3, runs=40, seed=0)
    res = run_benchmark(rm, ("Mapper", "KNN", "DBSCAN"), baseline_params={"min_pts": 5})
    assert [r.method for r in res.rows] == ["Mapper", "KNN", "DBSCAN"]
    positives = int((rm.truth == "Opportunistic").sum())
    assert all(r.tp + r.fn == positives for r in res.rows)
    assert all(r.tp + r.fp + r.tn + r.fn == len(rm.truth) for r in res.rows)
    with pytest.raises(ConfigError):
        run_benchmark(rm, ("Spectral",))


def test_pair_diagrams_share_one_lattice():
    s = simulate_trading_series("a", "C", seed=0, n_days=120)
    d = pair_diagrams(s, resolution=16)
    for pd in d.pre + d.non:
        assert np.all(np.isfinite(pd.pairs))
        assert np.all(pd.pairs[:, 0] >= pd.pairs[:, 1])
    # the essential H0 pair dies at the field minimum, and densities are nonnegative
    assert d.pre[0].pairs[-1, 1] >= 0 and d.non[0].pairs[-1, 1] >= 0
    assert d.bandwidth > 0


def test_pair_models_use_common_domain():
    s = simulate_trading_series("a", "C", seed=1, n_days=200)
    d = pair_diagrams(s)
    a, b = pair_models(d.pre[0], d.non[0], n_params=1)
    assert a.domain == b.domain and a.K == b.K == 1


def test_inactive_pair_is_skipped():
    s = AgentReturnSeries("a", "C", np.zeros(5), np.zeros(5, dtype=bool), np.zeros(5))
    assert pair_statistic(s) is None
    with pytest.raises(InputError):
        pair_diagrams(s)


def test_power_check_structure():
    opp, pools = simulate_power_panel(3, 2, True, seed=0, n_days=150)
    res = power_check(opp, pools, n_resamples=6, seed=0)
    assert res.p_values.shape == (6, 1) and res.ts.shape == (res.n_pairs, 1)
    assert [t[0] for t in res.tests] == [s.agent_id for s in opp][: res.n_pairs]
    with pytest.raises(InputError):
        power_check(opp[:1], pools[:1])
