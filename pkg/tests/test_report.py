import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contagion_tda.errors import InputError
from contagion_tda.report import (
    distance_summary,
    evaluate,
    fisher_overlap,
    metrics_from_counts,
    paired_right_p,
    read_metrics_csv,
    truth_from_labels,
    write_metrics_csv,
)


def test_evaluate_examples():
    truth = {0: True, 1: True, 2: False, 3: False, 4: True}
    r = evaluate([0, 2], truth, "m")
    assert (r.tp, r.fp, r.tn, r.fn) == (1, 1, 1, 2)
    assert r.precision == 0.5 and r.recall == pytest.approx(1 / 3) and r.f1 == pytest.approx(0.4)


def test_reference_benchmark_row():
    r = metrics_from_counts("Mapper", 208, 4, 1518, 100)
    assert round(r.precision, 4) == 0.9811 and round(r.recall, 4) == 0.6753
    # 2 * 208 / (2 * 208 + 4 + 100) is exactly 0.8
    assert r.f1 == pytest.approx(0.8, abs=1e-15)


def test_perfect_prediction():
    r = evaluate([1, 2], {0: False, 1: True, 2: True})
    assert r.precision == r.recall == r.f1 == 1.0


def test_empty_prediction_has_undefined_precision():
    r = evaluate([], {0: True, 1: False})
    assert r.precision is None and r.recall == 0.0 and r.f1 == 0.0
    r = evaluate([], {0: False})
    assert r.recall is None and r.f1 is None


def test_unknown_ids_rejected():
    with pytest.raises(InputError):
        evaluate([7], {0: True})


def test_truth_from_labels():
    assert truth_from_labels(["Passive", "Opportunistic"]) == {0: False, 1: True}


def test_metrics_csv_round_trip(tmp_path):
    rows = [metrics_from_counts("KNN", 3, 1, 10, 2), metrics_from_counts("DBSCAN", 0, 0, 12, 4)]
    write_metrics_csv(rows, tmp_path / "m.csv", extra=[{"run": 0}, {"run": 1}])
    assert (tmp_path / "m.csv").read_text().splitlines()[0].startswith("run,method,")
    assert read_metrics_csv(tmp_path / "m.csv") == rows


def enumerate_overlap(total, a, b, k):
    """Upper tail by counting every draw of ``b`` items."""
    items = range(total)
    hits = sum(1 for draw in combinations(items, b) if sum(1 for x in draw if x < a) >= k)
    return hits / math.comb(total, b)


@pytest.mark.parametrize("total,a,b,k", [(6, 2, 3, 1), (8, 4, 4, 3), (10, 3, 5, 0), (12, 5, 4, 4), (9, 9, 2, 2)])
def test_fisher_matches_enumeration(total, a, b, k):
    assert fisher_overlap(total, a, b, k) == pytest.approx(enumerate_overlap(total, a, b, k), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_fisher_matches_exact_sum(data):
    total = data.draw(st.integers(1, 30))
    a = data.draw(st.integers(0, total))
    b = data.draw(st.integers(0, total))
    k = data.draw(st.integers(0, min(a, b)))
    exact = sum(math.comb(a, x) * math.comb(total - a, b - x) for x in range(k, min(a, b) + 1)) / math.comb(total, b)
    assert fisher_overlap(total, a, b, k) == pytest.approx(exact, abs=1e-12)


def test_fisher_large_overlap_is_tiny():
    assert fisher_overlap(1284, 125, 158, 50) < 1e-10


def test_fisher_monotone_in_overlap():
    p = [fisher_overlap(100, 20, 30, k) for k in range(21)]
    assert p[0] == 1.0 and all(x >= y for x, y in zip(p, p[1:]))


def test_fisher_input_checks():
    for args in [(10, 11, 2, 0), (10, 3, 3, 4), (10, 3, 3, -1), (10, 2.5, 3, 0)]:
        with pytest.raises(InputError):
            fisher_overlap(*args)


def test_paired_right_p_edge_cases():
    assert paired_right_p([1.0, 1.0], [1.0, 1.0]) == 0.5
    assert paired_right_p([2.0, 3.0], [1.0, 2.0]) == 0.0
    assert math.isnan(paired_right_p([1.0], [0.0]))


def test_distance_summary():
    rng = np.random.default_rng(0)
    empty = np.zeros((0, 2))

    def dg(shift):
        b = rng.random(4)
        return np.column_stack([b, b + shift + rng.random(4) * 0.1])

    opp = [(dg(0.0), dg(1.0)) for _ in range(8)] + [None]
    ref = [(dg(0.0), dg(0.05)) for _ in range(8)] + [(empty, empty)]
    s = distance_summary(opp, ref)
    assert s.dropped == 1 and len(s.opportunistic) == 8
    assert s.paired_p < 0.01 and s.bottleneck_paired_p < 0.01 and s.one_sample_p < 0.01
    assert np.all(s.opportunistic_bottleneck <= s.opportunistic + 1e-12)
    with pytest.raises(InputError):
        distance_summary(opp[:2], ref[:1])
    with pytest.raises(InputError):
        distance_summary([None, None], ref[:2])


def test_identical_diagrams_do_not_reject():
    d = np.array([[1.0, 0.2], [0.7, 0.5]])
    s = distance_summary([(d, d)] * 4, [(d, d)] * 4)
    assert np.all(s.opportunistic == 0) and s.one_sample_p == 1.0 and s.paired_p == 0.5


def test_swapping_groups_flips_one_sided_test():
    rng = np.random.default_rng(3)

    def pair(gap):
        b = rng.random(3)
        return np.column_stack([b + 1, b]), np.column_stack([b + 1 + gap + rng.random(3) * 0.05, b])

    big = [pair(0.5) for _ in range(6)]
    small = [pair(0.05) for _ in range(6)]
    assert distance_summary(big, small).paired_p < 0.01
    assert distance_summary(small, big).paired_p > 0.99
