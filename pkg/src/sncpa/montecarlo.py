"""Size and power experiments over (DGP, parameter, drift, n, tau) grids.

Every replication applies the five compared statistics to one simulated
sample:

====  =====================================  ===========================
Q2    matrix-CUSUM, ``h_t = (1, predictor)``  matrix-cusum(2) quantiles
Q1    adjusted range, ``h_t = predictor``     range-ratio quantiles
T_SN  matrix-CUSUM on ``dL`` alone            shao-scalar quantiles
T_GW  HAC Wald, ``h_t = (1, predictor)``      chi-square(2)
T_DM  HAC t-ratio on ``dL``                   two-sided normal
====  =====================================  ===========================

Replication ``r`` of a cell draws from
``SeedSequence(seed, spawn_key=(cell_hash, r))`` where ``cell_hash`` is the
CRC-32 of the cell key, so any cell or replication can be rerun alone and
the report does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import limit
from .cache import CriticalValueCache
from .core import batch_matrix_form, batch_range_ratio
from .dgp import Dgp1Config, Dgp2Config, generate
from .errors import CacheMiss, InvalidConfig, MissingCriticalValues
from .hac import HacConfig, batch_t_dm, batch_t_gw, dm_critical_values, gw_critical_values

STATISTICS = ("Q2", "Q1", "T_SN", "T_GW", "T_DM")
LEVELS = (0.10, 0.05, 0.01)
STANDARD_N = (50, 100, 150, 200, 250, 300, 350, 400)


@dataclass(frozen=True)
class ExperimentGrid:
    dgp: int
    params: tuple
    drifts: tuple = (0.0,)
    n_values: tuple = STANDARD_N
    taus: tuple = (2,)
    reps: int = 5000
    levels: tuple = LEVELS
    seed: int = 20240501
    theta: float = 0.5
    hac: HacConfig = HacConfig()

    def __post_init__(self):
        if self.dgp not in (1, 2):
            raise InvalidConfig(f"dgp must be 1 or 2, got {self.dgp}")
        if self.reps < 1:
            raise InvalidConfig("reps must be >= 1")
        if not all(0.0 < a < 1.0 for a in self.levels):
            raise InvalidConfig("levels must lie in (0, 1)")
        for name in ("params", "drifts", "n_values", "taus", "levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def cells(self) -> list[tuple]:
        return [(p, d, tau, n) for p in self.params for d in self.drifts
                for tau in self.taus for n in self.n_values]

    def config(self, param, drift, tau, n):
        if self.dgp == 1:
            return Dgp1Config(rho=param, delta=drift, tau=tau, n=n, theta=self.theta)
        return Dgp2Config(p=param, d=drift, tau=tau, n=n, theta=self.theta)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hac"] = asdict(self.hac)
        return out


def cell_key(dgp, param, drift, tau, n, theta=0.5) -> str:
    return f"dgp{dgp}|param={param!r}|drift={drift!r}|tau={tau}|n={n}|theta={theta!r}"


def cell_hash(key: str) -> int:
    return zlib.crc32(key.encode("utf-8"))


def replication_rng(seed: int, key: str, r: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(cell_hash(key), r))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class CellRow:
    dgp: int
    param: float
    drift: float
    tau: int
    n: int
    statistic: str
    reps: int
    failures: int
    counts: tuple  # rejections per level, same order as McReport.levels

    def frequency(self, levels, level: float) -> float:
        return self.counts[list(levels).index(level)] / self.reps


@dataclass
class McReport:
    levels: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    def frequency(self, param, drift, tau, n, statistic, level) -> float:
        return self.row(param, drift, tau, n, statistic).frequency(self.levels, level)

    def row(self, param, drift, tau, n, statistic) -> CellRow:
        for row in self.rows:
            if (row.param, row.drift, row.tau, row.n, row.statistic) == (param, drift, tau, n, statistic):
                return row
        raise KeyError((param, drift, tau, n, statistic))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dgp", "param", "drift", "tau", "n", "statistic", "reps", "failures"]
                        + [f"rej_{a:g}" for a in self.levels]
                        + [f"count_{a:g}" for a in self.levels])
        for r in self.rows:
            writer.writerow([r.dgp, r.param, r.drift, r.tau, r.n, r.statistic, r.reps, r.failures]
                            + [repr(c / r.reps) for c in r.counts] + list(r.counts))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "metadata": self.metadata,
            "rows": [dict(asdict(r), counts=list(r.counts)) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "McReport":
        rows = [CellRow(**dict(r, counts=tuple(r["counts"]))) for r in data["rows"]]
        return cls(tuple(data["levels"]), rows, data.get("metadata", {}))

    @classmethod
    def from_json(cls, text: str) -> "McReport":
        return cls.from_dict(json.loads(text))


def critical_values_for(levels, cache: CriticalValueCache) -> tuple[dict, dict]:
    """Critical values for all five statistics plus the ids of the tables used."""
    cvs, ids = {}, {}
    families = {"Q2": limit.matrix_cusum(2), "Q1": limit.range_ratio(),
                "T_SN": limit.shao_scalar()}
    for name, family in families.items():
        try:
            table = cache.get(family)
        except CacheMiss as exc:
            raise MissingCriticalValues(str(exc)) from exc
        cvs[name] = {a: table.critical_value(a) for a in levels}
        ids[name] = table.ident
    cvs["T_GW"] = gw_critical_values(2, levels)
    cvs["T_DM"] = dm_critical_values(levels)
    ids["T_GW"] = "chi-square(2)"
    ids["T_DM"] = "normal two-sided"
    return cvs, ids


def cell_statistics(loss_diff: np.ndarray, predictor: np.ndarray, hac: HacConfig) -> dict:
    """All five statistics for a ``(B, n)`` batch; NaN marks an undefined value."""
    n = loss_diff.shape[-1]
    z2 = np.stack([loss_diff, predictor * loss_diff], axis=-1)
    lag = hac.lag(n)
    return {
        "Q2": batch_matrix_form(z2),
        "Q1": batch_range_ratio(z2[..., 1:])[..., 0],
        "T_SN": batch_matrix_form(loss_diff[..., None]),
        "T_GW": batch_t_gw(z2, lag, hac.prewhiten, hac.small_sample_adjust),
        "T_DM": batch_t_dm(loss_diff, lag, hac.prewhiten, hac.small_sample_adjust),
    }


def _run_cell(args) -> list[CellRow]:
    grid, cvs, (param, drift, tau, n) = args
    key = cell_key(grid.dgp, param, drift, tau, n, grid.theta)
    rngs = [replication_rng(grid.seed, key, r) for r in range(grid.reps)]
    loss_diff, predictor = generate(grid.config(param, drift, tau, n), rngs)
    stats = cell_statistics(loss_diff, predictor, grid.hac)
    rows = []
    for name in STATISTICS:
        values = stats[name]
        ok = ~np.isnan(values)
        magnitude = np.abs(values) if name == "T_DM" else values
        counts = tuple(int(np.sum(ok & (magnitude > cvs[name][a]))) for a in grid.levels)
        rows.append(CellRow(grid.dgp, param, drift, tau, n, name, grid.reps,
                            int(np.sum(~ok)), counts))
    return rows


def run_grid(grid: ExperimentGrid, cache: CriticalValueCache | None = None,
             workers: int = 1) -> McReport:
    """Rejection counts for every cell and statistic of ``grid``.

    Undefined statistics (degenerate range, singular normalizer or HAC
    matrix) count as failures, never as rejections.
    """
    cache = cache if cache is not None else CriticalValueCache()
    cvs, ids = critical_values_for(grid.levels, cache)
    jobs = [(grid, cvs, cell) for cell in grid.cells()]
    if workers <= 1:
        parts = [_run_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_cell, jobs))
    rows = [row for part in parts for row in part]
    metadata = {"grid": grid.to_dict(), "critical_value_tables": ids,
                "critical_values": {k: {repr(a): v for a, v in c.items()} for k, c in cvs.items()}}
    return McReport(grid.levels, rows, metadata)


def power_curve(report: McReport, level: float = 0.05) -> list[dict]:
    """Rejection frequency at ``level`` as a function of n, one curve per
    (parameter, drift, tau, statistic)."""
    curves: dict[tuple, list] = {}
    for row in report.rows:
        key = (row.dgp, row.param, row.drift, row.tau, row.statistic)
        curves.setdefault(key, []).append((row.n, row.frequency(report.levels, level)))
    out = []
    for (dgp, param, drift, tau, stat), points in curves.items():
        points.sort()
        out.append({"dgp": dgp, "param": param, "drift": drift, "tau": tau, "statistic": stat,
                    "n": [p[0] for p in points], "power": [p[1] for p in points]})
    return out
