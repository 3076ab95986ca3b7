import math

import numpy as np
import pytest

import oracles
from sncpa import limit
from sncpa.cache import CriticalValueCache
from sncpa.errors import CacheVersionError, InvalidConfig, SingularBridgeGram
from sncpa.limit import (
    CriticalValueTable,
    evaluate_functional,
    quantile_table,
    simulate_draws,
    simulate_functional,
)
from sncpa.reference import reference_quantile


def se_rule(table, prob, ref):
    """Within three standard errors of the difference of two M-draw estimates."""
    return abs(table.quantile(prob) - ref) <= 3 * math.sqrt(2) * table.std_error(prob)


def test_range_ratio_fixture_path_matches_oracle():
    rng = np.random.default_rng(11)
    inc = rng.normal(size=(1, 257))
    assert evaluate_functional(limit.range_ratio(), inc.copy()) == pytest.approx(
        oracles.range_ratio_functional(inc[0].tolist()), rel=1e-12)


def test_hand_path():
    # increments (1, 1, -1, -1): W = (0, .5, 1, .5, 0), bridge = W, range 1, B(1) = 0
    inc = np.array([[1.0, 1.0, -1.0, -1.0]])
    assert evaluate_functional(limit.range_ratio(), inc.copy()) == 0.0
    # increments (1, 0, 0, 0): W(1) = 1/2, bridge(k/4) = 1/2 - k/8 for k >= 1
    inc = np.array([[1.0, 0.0, 0.0, 0.0]])
    assert evaluate_functional(limit.range_ratio(), inc.copy()) == pytest.approx(0.25 / (0.375**2))
    shao = 0.25 / ((0.375**2 + 0.25**2 + 0.125**2 + 0.0) / 4)
    assert evaluate_functional(limit.shao_scalar(), inc.copy()) == pytest.approx(shao)


def test_zero_noncentrality_is_identical():
    a = simulate_functional(limit.range_ratio(), 500, seed=5, index=3)
    b = simulate_functional(limit.range_ratio(noncentrality=[0.0]), 500, seed=5, index=3)
    assert a == b


def test_q1_collapses():
    for i in range(5):
        rr = simulate_functional(limit.range_ratio(), 300, 9, i)
        assert simulate_functional(limit.component_range_sum(1), 300, 9, i) == rr
        shao = simulate_functional(limit.shao_scalar(), 300, 9, i)
        assert simulate_functional(limit.matrix_cusum(1), 300, 9, i) == pytest.approx(shao, rel=1e-12)


def test_component_range_sum_is_sum_of_coordinates():
    rng = np.random.default_rng(4)
    inc = rng.normal(size=(3, 400))
    total = sum(evaluate_functional(limit.range_ratio(), inc[[j]].copy()) for j in range(3))
    assert evaluate_functional(limit.component_range_sum(3), inc.copy()) == pytest.approx(total, rel=1e-12)


def test_noncentrality_enters_numerator_only():
    rng = np.random.default_rng(6)
    inc = rng.normal(size=(2, 300))
    walk = np.cumsum(inc, axis=1)
    b1 = walk[:, -1] / math.sqrt(300)
    j = np.array([0.7, -1.2])
    bridge = walk - np.outer(walk[:, -1], np.arange(1, 301) / 300)
    gram = bridge @ bridge.T / 300**2
    expected = (b1 + j) @ np.linalg.solve(gram, b1 + j)
    got = evaluate_functional(limit.matrix_cusum(2, j), inc.copy())
    assert got == pytest.approx(expected, rel=1e-10)


def test_singular_gram_raises():
    inc = np.zeros((2, 200))
    inc[0, :] = np.random.default_rng(0).normal(size=200)
    with pytest.raises(SingularBridgeGram):
        evaluate_functional(limit.matrix_cusum(2), inc.copy())
    with pytest.raises(SingularBridgeGram):
        evaluate_functional(limit.shao_scalar(), np.ones((1, 200)))


def test_family_validation():
    with pytest.raises(InvalidConfig):
        limit.range_ratio(q=2)
    with pytest.raises(InvalidConfig):
        limit.matrix_cusum(0)
    with pytest.raises(InvalidConfig):
        limit.matrix_cusum(2, noncentrality=[1.0])
    with pytest.raises(InvalidConfig):
        simulate_functional(limit.range_ratio(), 99, 1)
    with pytest.raises(InvalidConfig):
        quantile_table(limit.range_ratio(), 200, reps=99)


def test_determinism_and_worker_independence():
    fam = limit.matrix_cusum(2)
    a = quantile_table(fam, 300, 400, seed=77)
    b = quantile_table(fam, 300, 400, seed=77)
    c = quantile_table(fam, 300, 400, seed=77, workers=2)
    assert a.to_json() == b.to_json() == c.to_json()
    assert quantile_table(fam, 300, 400, seed=78).to_json() != a.to_json()


def test_draw_is_addressable_by_index():
    draws, _ = simulate_draws(limit.range_ratio(), 250, 30, seed=3)
    assert draws[17] == simulate_functional(limit.range_ratio(), 250, 3, index=17)


def test_table_json_roundtrip_and_version_check():
    t = quantile_table(limit.range_ratio(), 200, 200, seed=1)
    back = CriticalValueTable.from_json(t.to_json())
    assert back == t and back.to_json() == t.to_json()
    bad = t.to_dict()
    bad["generator_version"] = "other-0"
    with pytest.raises(CacheVersionError):
        CriticalValueTable.from_dict(bad)


def test_table_lookups():
    t = quantile_table(limit.range_ratio(), 200, 200, seed=1)
    assert t.critical_value(0.05) == t.quantile(0.95)
    with pytest.raises(KeyError):
        t.quantile(0.42)
    assert all(s > 0 for s in t.std_errors)


# shipped full-scale tables

def shipped(family):
    return CriticalValueCache(include_builtin=True).get(family, min_steps=200_000, min_reps=10_000)


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_shipped_tables_monotone(q):
    t = shipped(limit.matrix_cusum(q))
    assert list(t.values) == sorted(t.values)
    assert all(v >= 0 for v in t.values)


def test_matrix_quantiles_increase_in_q():
    tables = [shipped(limit.matrix_cusum(q)) for q in range(1, 6)]
    for p in limit.DEFAULT_PROBS:
        vals = [t.quantile(p) for t in tables]
        assert vals == sorted(vals) and len(set(vals)) == 5


@pytest.mark.parametrize("q,prob", [(1, 0.95), (2, 0.95), (3, 0.50), (1, 0.99), (5, 0.95)])
def test_reference_spot_values(q, prob):
    fam = limit.range_ratio() if q == 1 else limit.matrix_cusum(q)
    assert se_rule(shipped(fam), prob, reference_quantile(q, prob))


@pytest.mark.parametrize("prob", [0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99])
def test_range_ratio_table_matches_exact_law(prob):
    t = shipped(limit.range_ratio())
    exact = oracles.range_ratio_quantile(prob)
    assert abs(t.quantile(prob) - exact) <= 3 * t.std_error(prob)


def test_component_range_sum_fresh_seed():
    shipped_table = shipped(limit.component_range_sum(2))
    fresh = quantile_table(limit.component_range_sum(2), 20_000, 3_000, seed=4242)
    se = math.hypot(shipped_table.std_error(0.95), fresh.std_error(0.95))
    assert abs(fresh.critical_value(0.05) - shipped_table.critical_value(0.05)) <= 4 * se


@pytest.mark.slow
@pytest.mark.parametrize("family", [limit.range_ratio(), limit.matrix_cusum(2)], ids=lambda f: f.label)
def test_convergence_coarse_grid_many_reps(family):
    coarse = quantile_table(family, 2_000, 50_000, seed=99)
    fine = shipped(family)
    se = math.hypot(coarse.std_error(0.5), fine.std_error(0.5))
    assert abs(coarse.quantile(0.5) - fine.quantile(0.5)) <= 3 * se


def test_noncentral_dominance():
    null = quantile_table(limit.range_ratio(), 2_000, 10_000, seed=31)
    alt = quantile_table(limit.range_ratio(noncentrality=[1.0]), 2_000, 10_000, seed=31)
    assert alt.quantile(0.5) > null.quantile(0.5)
