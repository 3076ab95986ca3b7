"""HAC-based benchmark statistics and the unconditional self-normalized DM test.

The long-run covariance estimator is Newey-West with Bartlett weights
``w_j = 1 - j/(L+1)``.  The reference configuration uses the automatic
bandwidth ``L = floor(4 (n/100)^(2/9))`` without prewhitening or small-sample
adjustment; :class:`HacConfig` switches on VAR(1) prewhitening and the
``n/(n-1)`` adjustment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .core import EIG_RTOL, StatFamily, TestResult, TransformedSeries, batch_matrix_form
from .errors import DegenerateNormalizer, InvalidConfig, NonFiniteInput, SingularHac, TooShort

DEFAULT_LEVELS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class HacConfig:
    kernel: str = "bartlett"
    bandwidth: int | str = "auto"
    prewhiten: bool = False
    small_sample_adjust: bool = False

    def __post_init__(self):
        if self.kernel != "bartlett":
            raise InvalidConfig(f"unsupported kernel {self.kernel!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise InvalidConfig(f"bandwidth must be 'auto' or an integer, got {self.bandwidth!r}")
        elif int(self.bandwidth) != self.bandwidth or self.bandwidth < 0:
            raise InvalidConfig(f"fixed bandwidth must be a nonnegative integer, got {self.bandwidth}")

    def lag(self, n: int) -> int:
        if self.bandwidth == "auto":
            return auto_bandwidth(n)
        return int(self.bandwidth)


def auto_bandwidth(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def bartlett_weights(lag: int) -> np.ndarray:
    """Weights for autocovariance lags 1..lag."""
    j = np.arange(1, lag + 1)
    return 1.0 - j / (lag + 1.0)


def _kernel_sum(e: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-weighted autocovariance sum of already demeaned ``(..., m, q)`` data."""
    m = e.shape[-2]
    omega = np.einsum("...ti,...tj->...ij", e, e) / m
    for j, w in enumerate(bartlett_weights(lag), start=1):
        gamma = np.einsum("...ti,...tj->...ij", e[..., j:, :], e[..., :-j, :]) / m
        omega += w * (gamma + np.swapaxes(gamma, -1, -2))
    return omega


def _clip_psd(omega: np.ndarray) -> np.ndarray:
    omega = 0.5 * (omega + np.swapaxes(omega, -1, -2))
    bad = ~np.all(np.isfinite(omega), axis=(-2, -1))
    if np.any(bad):
        clipped = _clip_psd(np.where(bad[..., None, None], 0.0, omega))
        return np.where(bad[..., None, None], np.nan, clipped)
    w, v = np.linalg.eigh(omega)
    if np.all(w >= 0):
        return omega
    w = np.maximum(w, 0.0)
    return np.einsum("...ik,...k,...jk->...ij", v, w, v)


def batch_hac_lrv(x: np.ndarray, lag: int, prewhiten: bool = False,
                  adjust: bool = False) -> np.ndarray:
    """Long-run covariance over leading axes of ``(..., n, q)``; PSD by clipping.

    Entries whose prewhitening VAR(1) has a unit root (``I - A`` singular)
    come back as NaN matrices.
    """
    n, q = x.shape[-2:]
    e = x - x.mean(axis=-2, keepdims=True)
    if prewhiten:
        y, z = e[..., 1:, :], e[..., :-1, :]
        zz = np.einsum("...ti,...tj->...ij", z, z)
        zy = np.einsum("...ti,...tj->...ij", z, y)
        # least squares A' = (Z'Z)^+ Z'Y; pinv keeps constant columns finite
        coef_t = np.linalg.pinv(zz) @ zy
        resid = y - z @ coef_t
        omega = _kernel_sum(resid, lag)
        a = np.swapaxes(coef_t, -1, -2)
        i_minus_a = np.eye(q) - a
        unit_root = np.abs(np.linalg.det(i_minus_a)) < 1e-12
        inv = np.linalg.inv(np.where(unit_root[..., None, None], np.eye(q), i_minus_a))
        omega = inv @ omega @ np.swapaxes(inv, -1, -2)
        omega = np.where(unit_root[..., None, None], np.nan, omega)
    else:
        omega = _kernel_sum(e, lag)
    if adjust:
        omega = omega * (n / (n - 1.0))
    return _clip_psd(omega)


def _as_matrix(series) -> np.ndarray:
    if isinstance(series, TransformedSeries):
        return series.values
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidConfig(f"expected an (n, q) matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("series contains NaN or infinite values")
    return x


def hac_lrv(series, config: HacConfig = HacConfig()) -> np.ndarray:
    """Newey-West long-run covariance matrix of an ``(n, q)`` series."""
    x = _as_matrix(series)
    n = x.shape[0]
    lag = config.lag(n)
    if n <= 2 * (lag + 1):
        raise TooShort(f"n={n} too short for bandwidth {lag}")
    omega = batch_hac_lrv(x, lag, config.prewhiten, config.small_sample_adjust)
    if not np.all(np.isfinite(omega)):
        raise SingularHac("prewhitening VAR(1) has a unit root")
    return omega


def normal_quantile(p: float) -> float:
    return float(special.ndtri(p))


def chi2_quantile(q: int, p: float) -> float:
    """Chi-square quantile through the inverse regularized lower incomplete gamma.

    ``P(q/2, x/2) = p``  =>  ``x = 2 * gammaincinv(q/2, p)``.
    """
    if q < 1 or not 0.0 < p < 1.0:
        raise InvalidConfig(f"need q >= 1 and 0 < p < 1, got q={q}, p={p}")
    return float(2.0 * special.gammaincinv(q / 2.0, p))


def dm_critical_values(levels: Sequence[float] = DEFAULT_LEVELS) -> dict:
    return {a: normal_quantile(1.0 - a / 2.0) for a in levels}


def gw_critical_values(q: int, levels: Sequence[float] = DEFAULT_LEVELS) -> dict:
    return {a: chi2_quantile(q, 1.0 - a) for a in levels}


def _singular(omega: np.ndarray) -> np.ndarray:
    finite = np.all(np.isfinite(omega), axis=(-2, -1))
    eig = np.linalg.eigvalsh(np.where(finite[..., None, None], omega, 0.0))
    return ~finite | (eig[..., -1] <= 0) | (eig[..., 0] <= EIG_RTOL * eig[..., -1])


def batch_t_dm(d: np.ndarray, lag: int, prewhiten: bool = False, adjust: bool = False) -> np.ndarray:
    """Signed DM t-ratios for ``(..., n)`` loss differentials; NaN if undefined."""
    n = d.shape[-1]
    omega = batch_hac_lrv(d[..., None], lag, prewhiten, adjust)[..., 0, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = math.sqrt(n) * d.mean(axis=-1) / np.sqrt(omega)
    return np.where(omega > 0, t, np.nan)  # NaN omega also fails the test


def batch_t_gw(z: np.ndarray, lag: int, prewhiten: bool = False, adjust: bool = False) -> np.ndarray:
    """HAC Wald statistics for ``(..., n, q)`` series; NaN where the HAC matrix is singular."""
    n, q = z.shape[-2:]
    omega = batch_hac_lrv(z, lag, prewhiten, adjust)
    singular = _singular(omega)
    safe = np.where(singular[..., None, None], np.eye(q), omega)
    zbar = z.mean(axis=-2)
    sol = np.linalg.solve(safe, zbar[..., None])[..., 0]
    w = n * np.einsum("...i,...i->...", zbar, sol)
    return np.where(singular, np.nan, w)


def t_dm(loss_diff, config: HacConfig = HacConfig(), tau: int = 1,
         levels: Sequence[float] = DEFAULT_LEVELS) -> TestResult:
    """Diebold-Mariano t-ratio ``sqrt(n) dbar / sqrt(omega)``, two-sided normal test."""
    d = _as_matrix(loss_diff)
    if d.shape[1] != 1:
        raise InvalidConfig("DM statistic takes a single loss-differential column")
    omega = hac_lrv(d, config)[0, 0]
    if omega <= 0:
        raise SingularHac("HAC variance of the loss differential is zero")
    n = d.shape[0]
    t = math.sqrt(n) * float(d.mean()) / math.sqrt(omega)
    result = TestResult(t, StatFamily.HAC_DM, 1, tau, n)
    return result.with_critical_values(dm_critical_values(levels), "standard normal, two-sided")


def t_gw(series, config: HacConfig = HacConfig(),
         levels: Sequence[float] = DEFAULT_LEVELS) -> TestResult:
    """HAC Wald statistic ``n Zbar' Omega^{-1} Zbar`` against chi-square(q)."""
    tau = series.horizon if isinstance(series, TransformedSeries) else 1
    z = _as_matrix(series)
    n, q = z.shape
    omega = hac_lrv(z, config)
    if _singular(omega):
        raise SingularHac("HAC covariance matrix is numerically singular")
    zbar = z.mean(axis=0)
    w = float(n * zbar @ np.linalg.solve(omega, zbar))
    result = TestResult(w, StatFamily.HAC_GW, q, tau, n)
    return result.with_critical_values(gw_critical_values(q, levels), f"chi-square({q})")


def t_sn(loss_diff, tau: int = 1) -> TestResult:
    """Unconditional self-normalized DM statistic ``n dbar^2 / (n^{-1} sum_k T(k/n)^2)``."""
    d = _as_matrix(loss_diff)
    if d.shape[1] != 1:
        raise InvalidConfig("self-normalized DM statistic takes a single column")
    stat = batch_matrix_form(d)
    if np.isnan(stat):
        raise DegenerateNormalizer("CUSUM normalizer of the loss differential is zero")
    return TestResult(float(stat), StatFamily.SN_DM, 1, tau, d.shape[0])
