"""Route a user request to the right statistic and attach critical values.

Regimes for the self-normalized CPA statistics:

=========  ======  ================================  =======================
horizon    q       statistic                         null limit
=========  ======  ================================  =======================
tau >= 2   1       adjusted range (``q_scalar``)     range-ratio
tau >= 2   > 1     matrix CUSUM (``q_vector``)       matrix-cusum(q)
tau = 1    1       ``q_scalar_onestep``              range-ratio
tau = 1    > 1     LDL + componentwise range         component-range-sum(q)
=========  ======  ================================  =======================

``force_multistep`` sends tau = 1 requests down the multistep rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import limit
from .cache import CriticalValueCache
from .core import (
    TestResult,
    TransformedSeries,
    q_scalar,
    q_scalar_onestep,
    q_vector,
    q_vector_onestep,
    transform,
)
from .errors import CacheMiss, InvalidConfig, MissingCriticalValues
from .hac import DEFAULT_LEVELS, HacConfig, t_dm, t_gw, t_sn

STAT_CHOICES = ("q1", "q2", "sn-dm", "gw", "dm")


@dataclass(frozen=True)
class TestRequest:
    """Everything needed to run the statistics on one data set."""

    loss_diff: np.ndarray
    conditioning: np.ndarray | None = None  # (n, k) columns without the intercept
    intercept: bool = False
    tau: int = 1
    force_multistep: bool = False
    levels: tuple = DEFAULT_LEVELS
    hac: HacConfig = HacConfig()

    __test__ = False

    def test_function(self) -> np.ndarray | None:
        """``h_t``: optional ones column followed by the conditioning columns."""
        n = len(self.loss_diff)
        cols = []
        if self.intercept:
            cols.append(np.ones((n, 1)))
        if self.conditioning is not None and self.conditioning.size:
            cols.append(np.asarray(self.conditioning, dtype=float).reshape(n, -1))
        return np.hstack(cols) if cols else None

    def series(self) -> TransformedSeries:
        return transform(self.loss_diff, self.test_function(), horizon=self.tau)

    def scalar_series(self) -> TransformedSeries:
        """Single-column series for the scalar statistic: the conditioning
        column when there is one, ``h_t = 1`` when there is none."""
        cond = self.conditioning
        if cond is None or not cond.size:
            return transform(self.loss_diff, None, horizon=self.tau)
        cond = np.asarray(cond, dtype=float).reshape(len(self.loss_diff), -1)
        if cond.shape[1] != 1:
            raise InvalidConfig("q1 needs a single test-function column; use q2 for q > 1")
        return transform(self.loss_diff, cond, horizon=self.tau)


def _limit_critical_values(result: TestResult, family: limit.FunctionalFamily,
                           levels: Sequence[float], cache: CriticalValueCache) -> TestResult:
    try:
        table = cache.get(family)
    except CacheMiss as exc:
        raise MissingCriticalValues(str(exc)) from exc
    try:
        cvs = {a: table.critical_value(a) for a in levels}
    except KeyError as exc:
        raise InvalidConfig(str(exc.args[0])) from None
    source = f"{table.ident} (N={table.steps}, M={table.reps}, seed={table.seed})"
    return result.with_critical_values(cvs, source)


def _self_normalized(series: TransformedSeries, onestep: bool, levels, cache) -> TestResult:
    q = series.q
    if onestep:
        result = q_scalar_onestep(series) if q == 1 else q_vector_onestep(series)
        family = limit.range_ratio() if q == 1 else limit.component_range_sum(q)
    elif q == 1:
        result, family = q_scalar(series), limit.range_ratio()
    else:
        result, family = q_vector(series), limit.matrix_cusum(q)
    return _limit_critical_values(result, family, levels, cache)


def run_statistic(request: TestRequest, stat: str, cache: CriticalValueCache) -> TestResult:
    """One statistic with critical values at ``request.levels``.

    ``q1`` is the scalar self-normalized statistic (needs at most one
    conditioning column), ``q2`` the vector one on the full ``h_t``.
    """
    onestep = request.tau == 1 and not request.force_multistep
    levels = request.levels
    if stat == "q1":
        return _self_normalized(request.scalar_series(), onestep, levels, cache)
    if stat == "q2":
        return _self_normalized(request.series(), onestep, levels, cache)
    if stat == "sn-dm":
        result = t_sn(request.loss_diff, tau=request.tau)
        return _limit_critical_values(result, limit.shao_scalar(), levels, cache)
    if stat == "gw":
        return t_gw(request.series(), request.hac, levels)
    if stat == "dm":
        return t_dm(request.loss_diff, request.hac, tau=request.tau, levels=levels)
    raise InvalidConfig(f"unknown statistic {stat!r}; choose from {', '.join(STAT_CHOICES)}")


def stat_label(stat: str) -> str:
    return {"q1": "Q1", "q2": "Q2", "sn-dm": "T_SN", "gw": "T_GW", "dm": "T_DM"}[stat]
