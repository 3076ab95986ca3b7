"""Synthetic loss differentials for size and power experiments.

DGP 1: ``dL_t = delta * x_t + eps_{t+tau}`` with ``x_t`` a stationary AR(1)
rescaled to unit variance.  DGP 2: ``dL_t = d * (S_t - p) + eps_{t+tau}``
with ``S_t ~ Bernoulli(p)``.  In both, ``eps`` is an MA(tau-1) with
coefficients ``(1, theta, ..., theta)`` scaled to unit variance.

Random draws for one sample, in order: DGP 1 takes ``2n + tau``
standard normals (``x_0``, then ``u_1..u_n``, then ``v`` with its ``tau-1``
pre-sample values); DGP 2 takes ``n + tau - 1`` normals for ``v`` followed by
``n`` uniforms for the state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidConfig


class Truth(str, enum.Enum):
    NULL = "null"
    ALTERNATIVE = "alternative"


class TestFunction(str, enum.Enum):
    SCALAR_ONLY = "scalar"
    WITH_INTERCEPT = "intercept"

    __test__ = False


@dataclass(frozen=True)
class Dgp1Config:
    rho: float
    delta: float
    tau: int
    n: int
    theta: float = 0.5

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise InvalidConfig(f"|rho| must be < 1, got {self.rho}")
        if self.delta < 0:
            raise InvalidConfig(f"delta must be >= 0, got {self.delta}")
        _check_common(self.tau, self.n)

    @property
    def drift(self) -> float:
        return self.delta


@dataclass(frozen=True)
class Dgp2Config:
    p: float
    d: float
    tau: int
    n: int
    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise InvalidConfig(f"p must lie in (0, 1), got {self.p}")
        if self.d < 0:
            raise InvalidConfig(f"d must be >= 0, got {self.d}")
        _check_common(self.tau, self.n)

    @property
    def drift(self) -> float:
        return self.d


def _check_common(tau, n):
    if int(tau) != tau or tau < 1:
        raise InvalidConfig(f"tau must be a positive integer, got {tau}")
    if int(n) != n or n < 2:
        raise InvalidConfig(f"n must be an integer >= 2, got {n}")


@dataclass(frozen=True)
class SimulatedSample:
    loss_diff: np.ndarray
    predictor: np.ndarray
    truth: Truth
    drift: float = 0.0


def ma_scale(tau: int, theta: float = 0.5) -> float:
    """``c`` with ``c^2 (1 + theta^2 (tau - 1)) = 1``."""
    return 1.0 / math.sqrt(1.0 + theta**2 * (tau - 1))


def ma_errors(v: np.ndarray, tau: int, theta: float = 0.5) -> np.ndarray:
    """Unit-variance MA(tau-1) errors from ``(..., n + tau - 1)`` innovations."""
    coef = np.r_[1.0, np.full(tau - 1, theta)]
    return ma_scale(tau, theta) * lfilter(coef, [1.0], v, axis=-1)[..., tau - 1:]


def ar1_unit_variance(x0: np.ndarray, u: np.ndarray, rho: float) -> np.ndarray:
    """Stationary AR(1) started from ``x0`` scaled by ``sqrt(1 - rho^2)``.

    ``x0`` must already be drawn from the stationary law N(0, 1/(1 - rho^2)).
    """
    x = lfilter([1.0], [1.0, -rho], u, axis=-1, zi=rho * x0[..., None])[0]
    return x * math.sqrt(1.0 - rho**2)


def dgp1_from_normals(z: np.ndarray, config: Dgp1Config) -> tuple[np.ndarray, np.ndarray]:
    """Map ``(..., 2n + tau)`` standard normals to ``(loss_diff, x)``."""
    n, tau, rho = config.n, config.tau, config.rho
    x0 = z[..., 0] / math.sqrt(1.0 - rho**2)
    x = ar1_unit_variance(x0, z[..., 1:n + 1], rho)
    eps = ma_errors(z[..., n + 1:], tau, config.theta)
    return config.delta * x + eps, x


def dgp2_from_draws(v: np.ndarray, uniform: np.ndarray,
                    config: Dgp2Config) -> tuple[np.ndarray, np.ndarray]:
    state = (uniform < config.p).astype(float)
    eps = ma_errors(v, config.tau, config.theta)
    return config.d * (state - config.p) + eps, state


def draw_dgp1(rng: np.random.Generator, config: Dgp1Config) -> np.ndarray:
    return rng.standard_normal(2 * config.n + config.tau)


def draw_dgp2(rng: np.random.Generator, config: Dgp2Config) -> tuple[np.ndarray, np.ndarray]:
    v = rng.standard_normal(config.n + config.tau - 1)
    return v, rng.random(config.n)


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _truth(drift: float) -> Truth:
    return Truth.NULL if drift == 0 else Truth.ALTERNATIVE


def generate(config, rngs) -> tuple[np.ndarray, np.ndarray]:
    """Stack one sample per generator in ``rngs``; returns ``(loss_diff, predictor)``.

    Each row depends only on its own generator, so a batch equals the
    corresponding single-sample draws.
    """
    if isinstance(config, Dgp1Config):
        z = np.stack([draw_dgp1(r, config) for r in rngs])
        return dgp1_from_normals(z, config)
    if isinstance(config, Dgp2Config):
        pairs = [draw_dgp2(r, config) for r in rngs]
        v = np.stack([p[0] for p in pairs])
        uniform = np.stack([p[1] for p in pairs])
        return dgp2_from_draws(v, uniform, config)
    raise InvalidConfig(f"unknown configuration type {type(config).__name__}")


def gen_dgp1(config: Dgp1Config, seed) -> SimulatedSample:
    dl, x = generate(config, [_generator(seed)])
    return SimulatedSample(dl[0], x[0], _truth(config.delta), config.delta)


def gen_dgp2(config: Dgp2Config, seed) -> SimulatedSample:
    dl, s = generate(config, [_generator(seed)])
    return SimulatedSample(dl[0], s[0], _truth(config.d), config.d)


def test_function(sample: SimulatedSample, variant=TestFunction.WITH_INTERCEPT) -> np.ndarray:
    """Test-function matrix: the predictor alone, or ``[1, predictor]``."""
    variant = TestFunction(variant)
    h = np.asarray(sample.predictor, dtype=float)
    if variant is TestFunction.SCALAR_ONLY:
        return h[:, None]
    return np.column_stack([np.ones_like(h), h])


test_function.__test__ = False
