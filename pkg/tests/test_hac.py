import math

import mpmath
import numpy as np
import pytest

import oracles
from sncpa import limit
from sncpa.cache import CriticalValueCache
from sncpa.core import StatFamily, TransformedSeries
from sncpa.errors import DegenerateNormalizer, InvalidConfig, SingularHac, TooShort
from sncpa.hac import (
    HacConfig,
    auto_bandwidth,
    bartlett_weights,
    batch_hac_lrv,
    batch_t_dm,
    batch_t_gw,
    chi2_quantile,
    hac_lrv,
    t_dm,
    t_gw,
    t_sn,
)


def test_bandwidth_rule():
    assert auto_bandwidth(100) == 4
    assert auto_bandwidth(400) == 5
    assert auto_bandwidth(50) == 3
    assert HacConfig(bandwidth=7).lag(1000) == 7
    with pytest.raises(InvalidConfig):
        HacConfig(bandwidth=-1)
    with pytest.raises(InvalidConfig):
        HacConfig(kernel="parzen")


def test_bartlett_weights():
    w = bartlett_weights(4)
    np.testing.assert_allclose(w, [0.8, 0.6, 0.4, 0.2])
    assert w[-1] == pytest.approx(1 / 5)
    assert np.all(np.diff(w) < 0)


def test_lag_zero_is_sample_covariance():
    x = np.random.default_rng(1).normal(size=(200, 2))
    got = hac_lrv(x, HacConfig(bandwidth=0))
    np.testing.assert_allclose(got, np.cov(x.T, bias=True), rtol=1e-12)


def test_constant_series_gives_zero():
    np.testing.assert_allclose(hac_lrv(np.full((50, 2), 3.0), HacConfig()), 0.0, atol=1e-14)


def test_matches_naive_oracle():
    x = np.random.default_rng(2).normal(size=(40, 2))
    np.testing.assert_allclose(hac_lrv(x, HacConfig(bandwidth=3)), oracles.hac(x.tolist(), 3),
                               rtol=1e-12)


def test_ma1_long_run_variance():
    rng = np.random.default_rng(3)
    theta = 0.5
    v = rng.normal(size=10_001)
    y = v[1:] + theta * v[:-1]
    got = hac_lrv(y, HacConfig())[0, 0]
    assert got == pytest.approx((1 + theta) ** 2, rel=0.10)


def test_prewhitened_ar1_long_run_variance():
    rng = np.random.default_rng(4)
    rho, n = 0.6, 50_000
    e = rng.normal(size=n)
    y = np.empty(n)
    y[0] = e[0] / math.sqrt(1 - rho**2)
    for t in range(1, n):
        y[t] = rho * y[t - 1] + e[t]
    got = hac_lrv(y, HacConfig(bandwidth=0, prewhiten=True))[0, 0]
    assert got == pytest.approx(1 / (1 - rho) ** 2, rel=0.08)


def test_small_sample_adjustment():
    x = np.random.default_rng(5).normal(size=(30, 1))
    a = hac_lrv(x, HacConfig(bandwidth=2))
    b = hac_lrv(x, HacConfig(bandwidth=2, small_sample_adjust=True))
    np.testing.assert_allclose(b, a * 30 / 29, rtol=1e-14)


def test_near_unit_root_prewhitening_stays_finite():
    walk = np.cumsum(np.random.default_rng(0).normal(size=(300, 2)), axis=0)
    out = hac_lrv(walk, HacConfig(bandwidth=2, prewhiten=True))
    assert np.all(np.isfinite(out)) and np.linalg.eigvalsh(out)[0] >= -1e-10


def test_zero_variance_raises():
    with pytest.raises(SingularHac):
        t_dm(np.full(40, 0.7), HacConfig())
    assert np.isnan(batch_t_dm(np.full((2, 40), 0.7), 3)).all()


def test_too_short():
    with pytest.raises(TooShort):
        hac_lrv(np.random.default_rng(0).normal(size=(8, 1)), HacConfig(bandwidth=3))


def test_output_is_psd_after_clipping():
    rng = np.random.default_rng(6)
    for _ in range(50):
        x = rng.normal(size=(12, 3)) * rng.uniform(0.1, 5, size=3)
        w = np.linalg.eigvalsh(hac_lrv(x, HacConfig(bandwidth=4)))
        assert w[0] >= -1e-12


def test_t_dm_examples():
    d = np.array([1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 0.0, 0.0])
    assert t_dm(d, HacConfig(bandwidth=1)).statistic == 0.0
    d = np.array([0.3, 1.2, -0.4, 0.9, 2.0, -1.1, 0.7, 0.5, 1.4, -0.2])
    r = t_dm(d, HacConfig(bandwidth=2))
    assert r.statistic == pytest.approx(oracles.t_dm(d.tolist(), 2), rel=1e-12)
    assert r.family is StatFamily.HAC_DM
    assert r.critical_values[0.05] == pytest.approx(1.959963984540054, rel=1e-12)


def test_t_gw_examples():
    rng = np.random.default_rng(7)
    d = rng.normal(size=60) + 0.2
    cfg = HacConfig(bandwidth=3)
    assert t_gw(d[:, None], cfg).statistic == pytest.approx(t_dm(d, cfg).statistic ** 2, rel=1e-10)
    z = rng.normal(size=(12, 2))
    z -= z.mean(axis=0)
    assert t_gw(z, cfg).statistic == pytest.approx(0.0, abs=1e-20)
    z = np.array([[1.0, 0.5], [2.0, -1.0], [0.5, 0.0], [-1.0, 2.0], [3.0, 1.0], [0.0, 0.5],
                  [1.5, -0.5], [2.5, 1.5]])
    r = t_gw(TransformedSeries(z, horizon=2), HacConfig(bandwidth=1))
    assert r.statistic == pytest.approx(oracles.t_gw(z.tolist(), 1), rel=1e-12)
    assert (r.family, r.q, r.tau) == (StatFamily.HAC_GW, 2, 2)
    assert r.critical_values[0.05] == pytest.approx(5.991464547107979, rel=1e-10)


def test_t_gw_singular():
    c = np.random.default_rng(8).normal(size=(30, 1))
    with pytest.raises(SingularHac):
        t_gw(np.hstack([c, c]), HacConfig(bandwidth=2))


def test_t_sn_examples():
    assert t_sn([1.0, 2.0, 3.0]).statistic == pytest.approx(54.0, rel=1e-13)
    assert t_sn([1.0, -1.0, 1.0, -1.0]).statistic == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DegenerateNormalizer):
        t_sn([2.0, 2.0, 2.0])


@pytest.mark.parametrize("q,p,expected", [(1, 0.95, 3.8415), (2, 0.95, 5.9915), (1, 0.5, 0.4549)])
def test_chi2_table_values(q, p, expected):
    assert chi2_quantile(q, p) == pytest.approx(expected, abs=5e-5)


@pytest.mark.parametrize("q", [1, 2, 3, 5, 10])
@pytest.mark.parametrize("p", [0.01, 0.5, 0.9, 0.95, 0.99, 0.999])
def test_chi2_against_mpmath(q, p):
    mpmath.mp.dps = 40
    x = chi2_quantile(q, p)
    # regularized lower incomplete gamma at the returned point must equal p
    back = mpmath.gammainc(mpmath.mpf(q) / 2, 0, mpmath.mpf(x) / 2, regularized=True)
    dens = mpmath.exp(-mpmath.mpf(x) / 2) * (mpmath.mpf(x) / 2) ** (mpmath.mpf(q) / 2 - 1) / (
        2 * mpmath.gamma(mpmath.mpf(q) / 2))
    assert abs(float((back - p) / dens)) <= 1e-8


def test_batch_matches_single():
    rng = np.random.default_rng(9)
    z = rng.normal(size=(5, 60, 2))
    cfg = HacConfig()
    lag = cfg.lag(60)
    gw = batch_t_gw(z, lag)
    dm = batch_t_dm(z[..., 0], lag)
    for b in range(5):
        assert gw[b] == pytest.approx(t_gw(z[b], cfg).statistic, rel=1e-12)
        assert dm[b] == pytest.approx(t_dm(z[b, :, 0], cfg).statistic, rel=1e-12)


@pytest.mark.slow
def test_t_dm_iid_size_large_n():
    n, reps = 10_000, 5_000
    lag = auto_bandwidth(n)
    rejections = 0
    for start in range(0, reps, 250):
        d = np.stack([limit.substream(2024, start + i).standard_normal(n) for i in range(250)])
        rejections += int(np.sum(np.abs(batch_t_dm(d, lag)) > 1.959963984540054))
    assert 0.04 <= rejections / reps <= 0.06


def test_t_sn_iid_size(shipped_cache):
    cv = shipped_cache.get(limit.shao_scalar()).critical_value(0.05)
    d = np.stack([limit.substream(55, i).standard_normal(400) for i in range(5000)])
    from sncpa.core import batch_matrix_form

    rate = np.mean(batch_matrix_form(d[..., None]) > cv)
    assert 0.035 <= rate <= 0.065
