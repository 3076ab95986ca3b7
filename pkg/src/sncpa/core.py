"""Self-normalized CPA statistics built on the CUSUM process.

All statistics take a :class:`TransformedSeries`, the ``n x q`` matrix of
``Z_t = h_t * dL_t`` values, and return a :class:`TestResult`.  The array
kernels prefixed ``batch_`` evaluate the same formulas over arbitrary leading
axes (shape ``(..., n, q)``) and mark undefined statistics with NaN instead
of raising; the Monte Carlo driver uses them directly.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateRange,
    DimensionMismatch,
    HorizonMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    NotScalar,
    SingularNormalizer,
)

# Relative cutoffs for numerical degeneracy.
RANGE_RTOL = 1e-12
EIG_RTOL = 1e-12
PIVOT_RTOL = 1e-12
SYMMETRY_ATOL = 1e-10


class StatFamily(str, enum.Enum):
    SCALAR_MULTISTEP = "scalar-multistep"
    VECTOR_MULTISTEP = "vector-multistep"
    SCALAR_ONESTEP = "scalar-onestep"
    VECTOR_ONESTEP = "vector-onestep"
    HAC_DM = "hac-dm"
    HAC_GW = "hac-gw"
    SN_DM = "sn-dm"


@dataclass(frozen=True)
class TransformedSeries:
    """Transformed loss differential ``Z`` with its forecast metadata.

    ``values`` is stored as a read-only ``(n, q)`` float array.  ``horizon``
    only routes critical values and labels results; no formula uses it.
    """

    values: np.ndarray
    horizon: int = 1
    origin: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatch(f"expected an (n, q) matrix, got shape {values.shape}")
        n, q = values.shape
        if n < 2 or q < 1:
            raise DimensionMismatch(f"need n >= 2 and q >= 1, got n={n}, q={q}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("series contains NaN or infinite values")
        if int(self.horizon) < 1:
            raise DimensionMismatch(f"horizon must be a positive integer, got {self.horizon}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "origin", int(self.origin))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CusumPath:
    """Centered partial sums; ``points[k-1]`` holds ``T(k/n)`` for k = 1..n."""

    points: np.ndarray
    mean: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LdlFactors:
    d: np.ndarray
    lam: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.d @ np.diag(self.lam) @ self.d.T


@dataclass(frozen=True)
class TestResult:
    statistic: float
    family: StatFamily
    q: int
    tau: int
    n: int
    critical_values: Mapping[float, float] = field(default_factory=dict)
    decisions: Mapping[float, bool] = field(default_factory=dict)
    provenance: str = ""
    warnings: tuple = ()

    __test__ = False  # not a pytest class

    def with_critical_values(self, critical_values: Mapping[float, float],
                             provenance: str = "") -> "TestResult":
        """Attach critical values keyed by nominal level and decide each level.

        The DM statistic is a signed t-ratio and is compared in absolute
        value; every other family rejects for large values.
        """
        cvs = {float(a): float(c) for a, c in critical_values.items()}
        value = abs(self.statistic) if self.family is StatFamily.HAC_DM else self.statistic
        decisions = {a: bool(value > c) for a, c in cvs.items()}
        return TestResult(self.statistic, self.family, self.q, self.tau, self.n,
                          cvs, decisions, provenance or self.provenance, self.warnings)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "family": self.family.value,
            "q": self.q,
            "tau": self.tau,
            "n": self.n,
            "critical_values": {repr(a): c for a, c in self.critical_values.items()},
            "decisions": {repr(a): d for a, d in self.decisions.items()},
            "provenance": self.provenance,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestResult":
        return cls(
            statistic=data["statistic"],
            family=StatFamily(data["family"]),
            q=data["q"],
            tau=data["tau"],
            n=data["n"],
            critical_values={float(a): c for a, c in data["critical_values"].items()},
            decisions={float(a): d for a, d in data["decisions"].items()},
            provenance=data.get("provenance", ""),
            warnings=tuple(data.get("warnings", ())),
        )


# ---------------------------------------------------------------------------
# array kernels


def batch_cusum(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CUSUM paths along axis -2 of ``z``; returns ``(points, mean)``."""
    n = z.shape[-2]
    mean = z.mean(axis=-2, keepdims=True)
    points = np.cumsum(z - mean, axis=-2) / np.sqrt(n)
    return points, mean[..., 0, :]


def batch_ranges(points: np.ndarray) -> np.ndarray:
    """Adjusted range per coordinate; the grid includes ``T(0) = 0``."""
    return np.maximum(points.max(axis=-2), 0.0) - np.minimum(points.min(axis=-2), 0.0)


def _range_floor(z: np.ndarray) -> np.ndarray:
    n = z.shape[-2]
    return RANGE_RTOL * np.sqrt(n) * np.abs(z).max(axis=-2)


def batch_range_ratio(z: np.ndarray) -> np.ndarray:
    """``n * mean^2 / R^2`` per coordinate; NaN where the range is degenerate.

    Accepts ``(..., n, q)`` and returns ``(..., q)``.
    """
    n = z.shape[-2]
    points, mean = batch_cusum(z)
    r = batch_ranges(points)
    bad = r <= _range_floor(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = n * mean**2 / r**2
    return np.where(bad, np.nan, stat)


def batch_matrix_normalizer(points: np.ndarray) -> np.ndarray:
    n = points.shape[-2]
    return np.einsum("...ki,...kj->...ij", points, points) / n


def _quadratic_form(u: np.ndarray, zbar: np.ndarray, n: int, floor=0.0) -> np.ndarray:
    """``n * zbar' U^{-1} zbar`` with NaN where ``U`` is numerically singular.

    ``floor`` is an absolute lower bound on the top eigenvalue; below it
    every direction of ``U`` is rounding noise.
    """
    eig = np.linalg.eigvalsh(u)
    top = eig[..., -1]
    singular = (top <= floor) | (eig[..., 0] <= EIG_RTOL * top)
    q = u.shape[-1]
    safe = np.where(singular[..., None, None], np.eye(q), u)
    sol = np.linalg.solve(safe, zbar[..., None])[..., 0]
    stat = n * np.einsum("...i,...i->...", zbar, sol)
    return np.where(singular, np.nan, stat)


def batch_matrix_form(z: np.ndarray) -> np.ndarray:
    """Matrix-CUSUM statistic over leading axes of ``(..., n, q)``."""
    n = z.shape[-2]
    points, mean = batch_cusum(z)
    # same data-scale floor as the adjusted range, squared
    floor = _range_floor(z).max(axis=-1) ** 2
    return _quadratic_form(batch_matrix_normalizer(points), mean, n, floor)


def batch_ldl(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unpivoted LDL' of symmetric ``(..., q, q)`` matrices.

    Returns ``(d, lam, ok)``; ``ok`` is False where a pivot falls below
    ``PIVOT_RTOL * trace / q``.  Factors at failed entries are meaningless.
    """
    q = sigma.shape[-1]
    d = np.zeros_like(sigma, dtype=float)
    lam = np.zeros(sigma.shape[:-1], dtype=float)
    floor = PIVOT_RTOL * np.trace(sigma, axis1=-2, axis2=-1) / q
    ok = floor > 0
    for j in range(q):
        lam[..., j] = sigma[..., j, j] - np.sum(d[..., j, :j] ** 2 * lam[..., :j], axis=-1)
        ok &= lam[..., j] > floor
        d[..., j, j] = 1.0
        pivot = np.where(ok, lam[..., j], 1.0)
        for i in range(j + 1, q):
            acc = np.sum(d[..., i, :j] * d[..., j, :j] * lam[..., :j], axis=-1)
            d[..., i, j] = (sigma[..., i, j] - acc) / pivot
    return d, lam, ok


def _forward_substitute(d: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Solve ``d u_t = z_t`` for unit lower-triangular ``d``; z is (..., n, q)."""
    u = np.empty_like(z)
    q = z.shape[-1]
    for j in range(q):
        acc = z[..., j].copy()
        for k in range(j):
            acc -= d[..., None, j, k] * u[..., k]
        u[..., j] = acc
    return u


def batch_onestep_vector(z: np.ndarray) -> np.ndarray:
    """LDL-decorrelated sum of componentwise range ratios; NaN if undefined."""
    n = z.shape[-2]
    sigma = np.einsum("...ti,...tj->...ij", z, z) / n
    d, _, ok = batch_ldl(sigma)
    u = _forward_substitute(d, z)
    ratios = batch_range_ratio(u)
    stat = ratios.sum(axis=-1)
    return np.where(ok, stat, np.nan)


# ---------------------------------------------------------------------------
# single-series operations


def transform(loss_diff, test_fn=None, horizon: int = 1, origin: int = 0) -> TransformedSeries:
    """Scale each row of ``test_fn`` by the matching loss differential.

    ``test_fn=None`` means ``h_t = 1``.
    """
    dl = np.asarray(loss_diff, dtype=float)
    if dl.ndim != 1:
        raise DimensionMismatch(f"loss_diff must be a vector, got shape {dl.shape}")
    if test_fn is None:
        h = np.ones((dl.shape[0], 1))
    else:
        h = np.asarray(test_fn, dtype=float)
        if h.ndim == 1:
            h = h[:, None]
    if h.ndim != 2 or h.shape[0] != dl.shape[0]:
        raise DimensionMismatch(
            f"test function has shape {h.shape}, loss differential has {dl.shape[0]} rows")
    if not (np.all(np.isfinite(dl)) and np.all(np.isfinite(h))):
        raise NonFiniteInput("loss differential or test function contains NaN/inf")
    return TransformedSeries(h * dl[:, None], horizon=horizon, origin=origin)


def _as_series(series) -> TransformedSeries:
    if isinstance(series, TransformedSeries):
        return series
    return TransformedSeries(series)


def cusum(series: TransformedSeries) -> CusumPath:
    series = _as_series(series)
    points, mean = batch_cusum(series.values)
    return CusumPath(points, mean)


def adjusted_range(path: CusumPath) -> float:
    if path.q != 1:
        raise NotScalar(f"adjusted range needs a scalar path, got q={path.q}")
    return float(batch_ranges(path.points)[0])


def matrix_normalizer(path: CusumPath) -> np.ndarray:
    return batch_matrix_normalizer(path.points)


def _range_statistic(series: TransformedSeries) -> float:
    if series.q != 1:
        raise NotScalar(f"scalar statistic needs q=1, got q={series.q}")
    stat = batch_range_ratio(series.values)[0]
    if np.isnan(stat):
        raise DegenerateRange()
    return float(stat)


def q_scalar(series: TransformedSeries) -> TestResult:
    """Scalar multistep statistic ``n * Zbar^2 / R^2`` (adjusted range)."""
    series = _as_series(series)
    stat = _range_statistic(series)
    return TestResult(stat, StatFamily.SCALAR_MULTISTEP, 1, series.horizon, series.n)


def _check_onestep(series: TransformedSeries, force: bool) -> tuple:
    if series.horizon == 1:
        return ()
    if not force:
        raise HorizonMismatch(
            f"one-step statistic requested for horizon {series.horizon}; pass force=True to override")
    msg = (f"one-step statistic applied at horizon {series.horizon}; "
           "its null limit assumes a martingale difference sequence")
    warnings.warn(msg, stacklevel=3)
    return (msg,)


def q_scalar_onestep(series: TransformedSeries, force: bool = False) -> TestResult:
    """One-step scalar statistic; same formula as :func:`q_scalar`."""
    series = _as_series(series)
    notes = _check_onestep(series, force)
    stat = _range_statistic(series)
    return TestResult(stat, StatFamily.SCALAR_ONESTEP, 1, series.horizon, series.n,
                      warnings=notes)


def q_vector(series: TransformedSeries) -> TestResult:
    """Matrix-CUSUM statistic ``n Zbar' U^{-1} Zbar``."""
    series = _as_series(series)
    stat = batch_matrix_form(series.values)
    if np.isnan(stat):
        raise SingularNormalizer(
            "matrix self-normalizer is numerically singular "
            "(collinear or constant test-function columns?)")
    return TestResult(float(stat), StatFamily.VECTOR_MULTISTEP, series.q,
                      series.horizon, series.n)


def ldl(sigma) -> LdlFactors:
    """LDL' factorization ``sigma = d diag(lam) d'`` with unit lower-triangular ``d``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {sigma.shape}")
    scale = max(1.0, float(np.abs(sigma).max()))
    if np.abs(sigma - sigma.T).max() > SYMMETRY_ATOL * scale:
        raise DimensionMismatch("matrix is not symmetric")
    d, lam, ok = batch_ldl(sigma)
    if not ok:
        raise NotPositiveDefinite("LDL pivot below tolerance; matrix is not positive definite")
    return LdlFactors(d, lam)


def q_vector_onestep(series: TransformedSeries, force: bool = False) -> TestResult:
    """One-step vector statistic after LDL decorrelation.

    Uses the uncentered second-moment matrix ``n^{-1} sum Z_t Z_t'``.
    """
    series = _as_series(series)
    notes = _check_onestep(series, force)
    z = series.values
    sigma = z.T @ z / series.n
    factors = ldl(sigma)
    u = _forward_substitute(factors.d, z)
    ratios = batch_range_ratio(u)
    bad = np.flatnonzero(np.isnan(ratios))
    if bad.size:
        raise DegenerateRange(coordinate=int(bad[0]))
    return TestResult(float(ratios.sum()), StatFamily.VECTOR_ONESTEP, series.q,
                      series.horizon, series.n, warnings=notes)
