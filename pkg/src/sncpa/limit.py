"""Simulated limiting distributions of the self-normalized statistics.

Each draw discretizes a q-dimensional standard Brownian motion on ``N``
steps, ``W_k = N^{-1/2} sum_{i<=k} xi_i``, forms the bridge
``W_k - (k/N) W_N`` and evaluates one functional:

* ``range-ratio``          B(1)^2 / (sup bridge - inf bridge)^2        (q = 1)
* ``matrix-cusum``         B(1)' (int bridge bridge')^{-1} B(1)
* ``component-range-sum``  sum_j B_j(1)^2 / range(bridge_j)^2
* ``shao-scalar``          B(1)^2 / int bridge^2                       (q = 1)

A noncentrality vector ``J`` shifts ``B(1)`` in the numerator only.

Reproducibility contract: replication ``i`` of a table with seed ``s`` reads
its increments from ``Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``
via ``standard_normal`` (ziggurat), laid out as a ``(q, N)`` array.  A redraw
after a singular Gram matrix uses ``spawn_key=(i, attempt)``.  Values depend
only on ``(family, N, seed, i)``, never on how replications are scheduled.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidConfig, SingularBridgeGram

GENERATOR_VERSION = "sncpa-limit-1"
DEFAULT_PROBS = (0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99)
DEFAULT_STEPS = 200_000
DEFAULT_REPS = 10_000
DEFAULT_SEED = 1729
N_BATCHES = 20
MAX_REDRAWS = 100
GRAM_RTOL = 1e-12


class FunctionalKind(str, enum.Enum):
    RANGE_RATIO = "range-ratio"
    MATRIX_CUSUM = "matrix-cusum"
    COMPONENT_RANGE_SUM = "component-range-sum"
    SHAO_SCALAR = "shao-scalar"


_SCALAR_ONLY = (FunctionalKind.RANGE_RATIO, FunctionalKind.SHAO_SCALAR)


@dataclass(frozen=True)
class FunctionalFamily:
    kind: FunctionalKind
    q: int = 1
    noncentrality: tuple | None = None

    def __post_init__(self):
        kind = FunctionalKind(self.kind)
        object.__setattr__(self, "kind", kind)
        q = int(self.q)
        if q < 1:
            raise InvalidConfig(f"q must be >= 1, got {q}")
        if kind in _SCALAR_ONLY and q != 1:
            raise InvalidConfig(f"{kind.value} is defined for q=1 only")
        object.__setattr__(self, "q", q)
        if self.noncentrality is not None:
            j = tuple(float(v) for v in np.atleast_1d(self.noncentrality))
            if len(j) != q or not all(math.isfinite(v) for v in j):
                raise InvalidConfig(f"noncentrality must be {q} finite values, got {j}")
            object.__setattr__(self, "noncentrality", j)

    @property
    def label(self) -> str:
        text = f"{self.kind.value}-q{self.q}"
        if self.noncentrality is not None:
            text += "-J" + "_".join(f"{v:g}" for v in self.noncentrality)
        return text

    def to_dict(self) -> dict:
        return {"family": self.kind.value, "q": self.q,
                "J": None if self.noncentrality is None else list(self.noncentrality)}

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionalFamily":
        return cls(FunctionalKind(data["family"]), data["q"], data.get("J"))


def range_ratio(q: int = 1, noncentrality=None) -> FunctionalFamily:
    return FunctionalFamily(FunctionalKind.RANGE_RATIO, q, noncentrality)


def matrix_cusum(q: int, noncentrality=None) -> FunctionalFamily:
    return FunctionalFamily(FunctionalKind.MATRIX_CUSUM, q, noncentrality)


def component_range_sum(q: int, noncentrality=None) -> FunctionalFamily:
    return FunctionalFamily(FunctionalKind.COMPONENT_RANGE_SUM, q, noncentrality)


def shao_scalar(noncentrality=None) -> FunctionalFamily:
    return FunctionalFamily(FunctionalKind.SHAO_SCALAR, 1, noncentrality)


# ---------------------------------------------------------------------------
# single draws


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@lru_cache(maxsize=8)
def _grid_fraction(steps: int) -> np.ndarray:
    frac = np.arange(1, steps + 1, dtype=float) / steps
    frac.setflags(write=False)
    return frac


def evaluate_functional(family: FunctionalFamily, increments: np.ndarray) -> float:
    """Evaluate the family's functional on a ``(q, N)`` array of increments.

    Raises :class:`SingularBridgeGram` when the Riemann-sum Gram matrix of the
    bridge is numerically singular (matrix family only).
    """
    q, steps = increments.shape
    if q != family.q:
        raise InvalidConfig(f"increments have {q} rows, family needs {family.q}")
    walk = np.cumsum(increments, axis=1)
    end = walk[:, -1].copy()
    bridge = walk
    bridge -= np.multiply.outer(end, _grid_fraction(steps))
    root = math.sqrt(steps)
    b1 = end / root
    if family.noncentrality is not None:
        b1 = b1 + np.asarray(family.noncentrality)
    kind = family.kind
    if kind in (FunctionalKind.RANGE_RATIO, FunctionalKind.COMPONENT_RANGE_SUM):
        ranges = (np.maximum(bridge.max(axis=1), 0.0) - np.minimum(bridge.min(axis=1), 0.0)) / root
        return float(np.sum(b1**2 / ranges**2))
    gram = (bridge @ bridge.T) / (steps * steps)
    # below this the bridge is rounding noise of a (numerically) linear walk
    floor = steps * (GRAM_RTOL * np.abs(increments).max()) ** 2
    if kind is FunctionalKind.SHAO_SCALAR:
        if gram[0, 0] <= floor:
            raise SingularBridgeGram("bridge has zero energy")
        return float(b1[0] ** 2 / gram[0, 0])
    eig = np.linalg.eigvalsh(gram)
    if eig[-1] <= floor or eig[0] <= GRAM_RTOL * eig[-1]:
        raise SingularBridgeGram("bridge Gram matrix is numerically singular")
    return float(b1 @ np.linalg.solve(gram, b1))


def _draw(family: FunctionalFamily, steps: int, seed: int, index: int) -> tuple[float, int]:
    for attempt in range(MAX_REDRAWS + 1):
        key = (index,) if attempt == 0 else (index, attempt)
        increments = substream(seed, *key).standard_normal((family.q, steps))
        try:
            return evaluate_functional(family, increments), attempt
        except SingularBridgeGram:
            continue
    raise SingularBridgeGram(f"replication {index}: {MAX_REDRAWS} consecutive singular draws")


def simulate_functional(family: FunctionalFamily, steps: int, seed: int, index: int = 0) -> float:
    """One draw of the functional from replication ``index`` of stream ``seed``."""
    if steps < 100:
        raise InvalidConfig(f"steps must be >= 100, got {steps}")
    return _draw(family, steps, seed, index)[0]


def _draw_chunk(args) -> tuple[np.ndarray, int]:
    family, steps, seed, start, stop = args
    values = np.empty(stop - start)
    redraws = 0
    for i in range(start, stop):
        values[i - start], extra = _draw(family, steps, seed, i)
        redraws += extra
    return values, redraws


def simulate_draws(family: FunctionalFamily, steps: int, reps: int, seed: int,
                   workers: int = 1) -> tuple[np.ndarray, int]:
    """All ``reps`` draws in replication order plus the total redraw count."""
    if steps < 100:
        raise InvalidConfig(f"steps must be >= 100, got {steps}")
    chunk = max(1, min(500, -(-reps // max(1, 4 * workers))))
    jobs = [(family, steps, seed, s, min(reps, s + chunk)) for s in range(0, reps, chunk)]
    if workers <= 1:
        parts = [_draw_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_draw_chunk, jobs))
    values = np.concatenate([p[0] for p in parts])
    return values, sum(p[1] for p in parts)


# ---------------------------------------------------------------------------
# quantile tables


@dataclass(frozen=True)
class CriticalValueTable:
    family: FunctionalFamily
    probs: tuple
    values: tuple
    steps: int
    reps: int
    seed: int
    std_errors: tuple = ()
    redraws: int = 0
    generator_version: str = GENERATOR_VERSION
    extra: dict = field(default_factory=dict, compare=False)

    def quantile(self, prob: float) -> float:
        for p, v in zip(self.probs, self.values):
            if abs(p - prob) < 1e-9:
                return v
        raise KeyError(f"probability {prob} not tabulated for {self.family.label}; "
                       f"available: {list(self.probs)}")

    def critical_value(self, alpha: float) -> float:
        return self.quantile(1.0 - alpha)

    def std_error(self, prob: float) -> float:
        for p, s in zip(self.probs, self.std_errors):
            if abs(p - prob) < 1e-9:
                return s
        raise KeyError(f"no standard error for probability {prob}")

    @property
    def ident(self) -> str:
        return f"{self.family.label}-N{self.steps}-M{self.reps}-s{self.seed}"

    def to_dict(self) -> dict:
        out = self.family.to_dict()
        out.update({
            "steps": self.steps,
            "reps": self.reps,
            "seed": self.seed,
            "probs": list(self.probs),
            "values": list(self.values),
            "std_errors": list(self.std_errors),
            "redraws": self.redraws,
            "generator_version": self.generator_version,
        })
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CriticalValueTable":
        from .errors import CacheVersionError

        version = data.get("generator_version")
        if version != GENERATOR_VERSION:
            raise CacheVersionError(
                f"table written by generator {version!r}, this build reads {GENERATOR_VERSION!r}")
        return cls(
            family=FunctionalFamily.from_dict(data),
            probs=tuple(float(p) for p in data["probs"]),
            values=tuple(float(v) for v in data["values"]),
            steps=int(data["steps"]),
            reps=int(data["reps"]),
            seed=int(data["seed"]),
            std_errors=tuple(float(s) for s in data.get("std_errors", ())),
            redraws=int(data.get("redraws", 0)),
            generator_version=version,
        )

    @classmethod
    def from_json(cls, text: str) -> "CriticalValueTable":
        return cls.from_dict(json.loads(text))


def batched_quantile_se(draws: np.ndarray, probs: Sequence[float],
                        batches: int = N_BATCHES) -> np.ndarray:
    """Standard error of each empirical quantile from ``batches`` contiguous batches."""
    parts = np.array_split(np.asarray(draws), batches)
    per_batch = np.array([np.quantile(p, probs) for p in parts])
    return per_batch.std(axis=0, ddof=1) / math.sqrt(batches)


def table_from_draws(family: FunctionalFamily, draws: np.ndarray, probs, steps: int,
                     seed: int, redraws: int = 0) -> CriticalValueTable:
    probs = tuple(float(p) for p in probs)
    # numpy's default "linear" method is the type-7 estimator
    values = np.quantile(draws, probs)
    se = batched_quantile_se(draws, probs)
    return CriticalValueTable(family, probs, tuple(float(v) for v in values), steps,
                              len(draws), seed, tuple(float(s) for s in se), redraws)


def quantile_table(family: FunctionalFamily, steps: int = DEFAULT_STEPS, reps: int = DEFAULT_REPS,
                   probs: Sequence[float] = DEFAULT_PROBS, seed: int = DEFAULT_SEED,
                   workers: int = 1) -> CriticalValueTable:
    """Empirical (type-7) quantiles of ``reps`` independent draws."""
    if reps < 100:
        raise InvalidConfig(f"reps must be >= 100, got {reps}")
    if not all(0.0 < p < 1.0 for p in probs):
        raise InvalidConfig("probabilities must lie in (0, 1)")
    draws, redraws = simulate_draws(family, steps, reps, seed, workers)
    return table_from_draws(family, draws, probs, steps, seed, redraws)
