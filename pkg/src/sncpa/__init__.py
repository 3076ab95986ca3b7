"""Self-normalized conditional predictive ability tests for multistep forecasts."""

from .cache import CriticalValueCache, critical_value
from .core import (
    CusumPath,
    LdlFactors,
    StatFamily,
    TestResult,
    TransformedSeries,
    adjusted_range,
    cusum,
    ldl,
    matrix_normalizer,
    q_scalar,
    q_scalar_onestep,
    q_vector,
    q_vector_onestep,
    transform,
)
from .dispatch import TestRequest, run_statistic
from .dgp import Dgp1Config, Dgp2Config, SimulatedSample, TestFunction, gen_dgp1, gen_dgp2, test_function
from .errors import *  # noqa: F401,F403
from .hac import HacConfig, hac_lrv, t_dm, t_gw, t_sn
from .limit import CriticalValueTable, FunctionalFamily, quantile_table, simulate_functional
from .montecarlo import ExperimentGrid, McReport, power_curve, run_grid

__version__ = "0.1.0"
