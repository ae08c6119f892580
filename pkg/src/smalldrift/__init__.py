"""Goodness-of-fit testing for the drift of a small-noise diffusion.

The test asks whether discretely observed data from
dX = S(X)dt + eps*sigma(X)dW is consistent with a hypothesized drift
S0.  Its normalized statistic is asymptotically distribution free: as
eps -> 0 (with observation mesh o(eps^2)) it converges to the supremum
of |Brownian motion| on [0, 1] regardless of (S0, sigma).
"""

from .backend import numba_enabled
from .errors import (
    BlowupError,
    DataFormatError,
    DegenerateModelError,
    DegeneratePathError,
    EvalError,
    ExperimentError,
    InsufficientSampleError,
    ModelError,
    ParseError,
    SmallDriftError,
)
from .expr import Expression, estimate_lipschitz, parse
from .harness import (
    ExperimentConfig,
    McReport,
    SweepReport,
    run_convergence_sweep,
    run_power_experiment,
    run_size_experiment,
    wilson_interval,
)
from .limitdist import SupAbsBmDistribution, cdf, p_value, quantile, sample_sup_abs_bm
from .model import (
    DeterministicPath,
    LimitVariance,
    ModelSpec,
    ValidationReport,
    limit_variance,
    solve_ode,
    validate,
)
from .simulate import (
    MomentReport,
    ObservedPath,
    SamplingGrid,
    gronwall_violations,
    increment_moments,
    make_grid,
    simulate_path,
)
from .statistic import (
    SeparationResult,
    TestCurve,
    TestReport,
    VarianceEstimate,
    drift_discrepancy,
    m_statistic,
    run_test,
    separation_curve,
    sigma_hat,
    u_statistic,
    v_statistic,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "DataFormatError",
    "DegenerateModelError",
    "DegeneratePathError",
    "DeterministicPath",
    "EvalError",
    "ExperimentError",
    "ExperimentConfig",
    "Expression",
    "InsufficientSampleError",
    "LimitVariance",
    "McReport",
    "ModelError",
    "ModelSpec",
    "MomentReport",
    "ObservedPath",
    "ParseError",
    "SamplingGrid",
    "SeparationResult",
    "SmallDriftError",
    "SupAbsBmDistribution",
    "SweepReport",
    "TestCurve",
    "TestReport",
    "ValidationReport",
    "VarianceEstimate",
    "cdf",
    "drift_discrepancy",
    "estimate_lipschitz",
    "gronwall_violations",
    "increment_moments",
    "limit_variance",
    "m_statistic",
    "make_grid",
    "numba_enabled",
    "p_value",
    "parse",
    "quantile",
    "run_convergence_sweep",
    "run_power_experiment",
    "run_size_experiment",
    "run_test",
    "sample_sup_abs_bm",
    "separation_curve",
    "sigma_hat",
    "simulate_path",
    "solve_ode",
    "u_statistic",
    "v_statistic",
    "validate",
    "wilson_interval",
]
