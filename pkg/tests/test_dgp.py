import math

import numpy as np
import pytest

from sncpa.dgp import (
    Dgp1Config,
    Dgp2Config,
    TestFunction,
    Truth,
    ar1_unit_variance,
    gen_dgp1,
    gen_dgp2,
    generate,
    ma_errors,
    ma_scale,
    test_function,
)
from sncpa.errors import InvalidConfig
from sncpa.limit import substream

BIG = 1_000_000


def test_ma_scale_examples():
    assert ma_scale(1) == 1.0
    assert ma_scale(2, 0.5) == pytest.approx(1 / math.sqrt(1.25), abs=1e-6)
    assert ma_scale(2, 0.5) == pytest.approx(0.894427, abs=1e-6)


def test_ma_errors_against_loop():
    rng = np.random.default_rng(0)
    tau, theta, n = 3, 0.5, 20
    v = rng.normal(size=n + tau - 1)
    c = ma_scale(tau, theta)
    naive = [c * (v[t + tau - 1] + theta * sum(v[t + tau - 1 - j] for j in range(1, tau)))
             for t in range(n)]
    np.testing.assert_allclose(ma_errors(v, tau, theta), naive, rtol=1e-13)


def test_ar1_against_loop():
    rng = np.random.default_rng(1)
    rho, n = 0.7, 15
    x0 = rng.normal() / math.sqrt(1 - rho**2)
    u = rng.normal(size=n)
    prev, naive = x0, []
    for t in range(n):
        prev = rho * prev + u[t]
        naive.append(prev * math.sqrt(1 - rho**2))
    np.testing.assert_allclose(ar1_unit_variance(np.array(x0), u, rho), naive, rtol=1e-13)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        Dgp1Config(rho=1.0, delta=0, tau=2, n=10)
    with pytest.raises(InvalidConfig):
        Dgp1Config(rho=0.2, delta=-1, tau=2, n=10)
    with pytest.raises(InvalidConfig):
        Dgp2Config(p=0.0, d=0, tau=2, n=10)
    with pytest.raises(InvalidConfig):
        Dgp2Config(p=0.5, d=0, tau=0, n=10)


def test_determinism_and_truth():
    cfg = Dgp1Config(0.5, 0.0, 2, 100)
    a, b = gen_dgp1(cfg, 7), gen_dgp1(cfg, 7)
    np.testing.assert_array_equal(a.loss_diff, b.loss_diff)
    assert a.truth is Truth.NULL
    assert gen_dgp1(Dgp1Config(0.5, 0.2, 2, 100), 7).truth is Truth.ALTERNATIVE
    assert not np.array_equal(gen_dgp1(cfg, 8).loss_diff, a.loss_diff)


def test_batch_equals_single_draws():
    cfg = Dgp2Config(0.3, 0.5, 3, 50)
    dl, s = generate(cfg, [substream(1, 0, r) for r in range(4)])
    for r in range(4):
        single = gen_dgp2(cfg, substream(1, 0, r))
        np.testing.assert_array_equal(single.loss_diff, dl[r])
        np.testing.assert_array_equal(single.predictor, s[r])


def test_dgp1_null_mean():
    s = gen_dgp1(Dgp1Config(0.5, 0.0, 2, BIG), 11)
    # long-run sd of eps (MA(1), theta = .5) is c (1 + theta) = 1.5 / sqrt(1.25)
    se = 1.5 / math.sqrt(1.25) / math.sqrt(BIG)
    assert abs(s.loss_diff.mean()) < 4 * se


def test_dgp1_unit_variances_and_autocorrelation():
    rho = 0.8
    s = gen_dgp1(Dgp1Config(rho, 0.0, 3, BIG), 12)
    x, eps = s.predictor, s.loss_diff
    assert x.var() == pytest.approx(1.0, rel=0.02)
    assert eps.var() == pytest.approx(1.0, rel=0.02)
    assert np.corrcoef(x[1:], x[:-1])[0, 1] == pytest.approx(rho, abs=0.01)


@pytest.mark.parametrize("tau", [2, 3])
def test_ma_cutoff(tau):
    eps = gen_dgp1(Dgp1Config(0.2, 0.0, tau, BIG), 13).loss_diff
    e = eps - eps.mean()
    for lag in (tau, tau + 1, tau + 3):
        r = e[lag:] @ e[:-lag] / (e @ e)
        assert abs(r) < 3 / math.sqrt(BIG)
    r1 = e[1:] @ e[:-1] / (e @ e)
    assert r1 > 0.2  # overlap correlation below the cutoff is real


def test_dgp1_drift_regression():
    s = gen_dgp1(Dgp1Config(0.5, 0.2, 2, BIG), 14)
    slope = np.polyfit(s.predictor, s.loss_diff, 1)[0]
    assert abs(slope - 0.2) <= 0.01 * 0.2


@pytest.mark.parametrize("d", [0.0, 0.5, 2.0])
def test_dgp2_mean_zero_for_any_drift(d):
    s = gen_dgp2(Dgp2Config(0.3, d, 2, BIG), 15)
    sd = math.sqrt(d**2 * 0.3 * 0.7 + (1.5**2 / 1.25))
    assert abs(s.loss_diff.mean()) < 4 * sd / math.sqrt(BIG)


def test_dgp2_conditional_mean():
    s = gen_dgp2(Dgp2Config(0.5, 0.5, 2, BIG), 16)
    on = s.loss_diff[s.predictor == 1]
    assert on.mean() == pytest.approx(0.25, abs=4 * 1.0 / math.sqrt(on.size))


def test_test_function_variants():
    s2 = gen_dgp2(Dgp2Config(0.4, 0.5, 2, 30), 3)
    h = test_function(s2, TestFunction.SCALAR_ONLY)
    assert h.shape == (30, 1) and set(np.unique(h)) <= {0.0, 1.0}
    h = test_function(s2, TestFunction.WITH_INTERCEPT)
    assert h.shape == (30, 2) and np.all(h[:, 0] == 1.0)
    np.testing.assert_array_equal(h[:, 1], s2.predictor)
