"""Model specification, the deterministic limit path, and validation.

The small-noise model is dX = S(X)dt + eps*sigma(X)dW on [0, T] with
X_0 = x0.  As eps -> 0 paths concentrate around the solution x_t of
dx/dt = S(x), and the limiting noise scale of the test statistic is
Sigma = sqrt(integral of sigma(x_t)^2 over [0, T]).  This module solves
the ODE (RK4), computes Sigma (composite Simpson on the ODE grid), and
checks the standing regularity conditions numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import BlowupError, DegenerateModelError, EvalError, ModelError
from .expr import Expression, compile_program, estimate_lipschitz
from .kernels import rk4_path

DEFAULT_ODE_STEPS = 10_000
SIGMA_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Drift S, diffusion sigma, start x0, horizon T, noise scale eps."""

    drift: Expression
    diffusion: Expression
    x0: float
    T: float
    eps: float

    def __post_init__(self):
        if not (self.T > 0):
            raise ModelError(f"horizon T must be positive, got {self.T}")
        if not (0 < self.eps <= 1):
            raise ModelError(f"eps must lie in (0, 1], got {self.eps}")
        for name, e in (("drift", self.drift), ("diffusion", self.diffusion)):
            try:
                e.eval(self.x0)
            except EvalError as err:
                raise ModelError(
                    f"{name} {e.to_source()!r} does not evaluate at x0 = {self.x0}: {err}"
                ) from err


@dataclass(frozen=True, eq=False)
class DeterministicPath:
    """Solution of dx/dt = S(x) on an even-count uniform grid."""

    times: np.ndarray
    values: np.ndarray
    step: float


@dataclass(frozen=True)
class LimitVariance:
    sigma_limit: float
    quadrature_step: float


@dataclass(frozen=True)
class ValidationReport:
    """Numeric check of the regularity conditions on a working interval.

    Lipschitz constants are grid estimates (lower bounds); warnings
    flag suspected locally-Lipschitz-only coefficients and boundary
    cases, and never block the test.  A numerically zero sigma_limit is
    the one hard failure (the statistic could not be normalized).
    """

    lipschitz_drift: float
    lipschitz_sigma: float
    sigma_limit: float
    a3_ok: bool
    working_interval: tuple[float, float]
    warnings: list[str] = field(default_factory=list)


def solve_ode(model: ModelSpec, step: float | None = None) -> DeterministicPath:
    """RK4 integration of dx/dt = S(x), x(0) = x0, up to T.

    The grid is uniform with width at most ``step`` (intervals shrink a
    little so that an even number of them lands exactly on T, keeping
    the grid Simpson-ready).  Default step is T / 10^4.
    """
    if step is None:
        step = model.T / DEFAULT_ODE_STEPS
    if not (0 < step <= model.T):
        raise ModelError(f"step must lie in (0, T], got {step}")
    n = math.ceil(model.T / step)
    if n % 2:
        n += 1
    times = np.linspace(0.0, model.T, n + 1)
    values, bad = rk4_path(compile_program(model.drift), model.x0, times)
    if bad >= 0:
        raise BlowupError("ODE state became non-finite", time=float(times[bad]))
    return DeterministicPath(times=times, values=values, step=model.T / n)


def limit_variance(model: ModelSpec, path: DeterministicPath) -> LimitVariance:
    """Sigma = sqrt of the Simpson quadrature of sigma(x_t)^2 over [0, T]."""
    integrand = model.diffusion.eval_many(path.values) ** 2
    sigma_sq = float(simpson(integrand, x=path.times))
    # Integrand >= 0, so only rounding can push the quadrature below 0.
    assert sigma_sq > -1e-15, f"negative quadrature of a nonnegative integrand: {sigma_sq}"
    return LimitVariance(sigma_limit=math.sqrt(max(sigma_sq, 0.0)),
                         quadrature_step=path.step)


def _lipschitz_with_growth_check(e: Expression, lo: float, hi: float,
                                 warnings: list[str], label: str) -> float:
    est = estimate_lipschitz(e, lo, hi, 2001)
    # A constant that keeps growing when the interval is doubled points
    # at a locally-Lipschitz-only coefficient (e.g. x^2).
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    try:
        wider = estimate_lipschitz(e, mid - 2 * half, mid + 2 * half, 2001)
    except EvalError:
        wider = est
    if est > 0 and wider > 1.1 * est:
        warnings.append(
            f"{label} {e.to_source()!r} looks locally Lipschitz only: the "
            f"estimated constant grows from {est:.4g} to {wider:.4g} when "
            f"the working interval is doubled"
        )
    return est


def validate(model: ModelSpec,
             working_interval: tuple[float, float] | None = None) -> ValidationReport:
    """Check the regularity conditions numerically.

    The default working interval is [x0 - 5, x0 + 5] merged with the
    range of the deterministic path, padded by 20% of its width; paths
    concentrate near that path for small eps.
    """
    path = solve_ode(model)
    if working_interval is None:
        lo = min(model.x0 - 5.0, float(path.values.min()))
        hi = max(model.x0 + 5.0, float(path.values.max()))
        pad = 0.1 * (hi - lo)
        working_interval = (lo - pad, hi + pad)
    lo, hi = working_interval
    if not (lo <= model.x0 <= hi):
        raise ModelError(
            f"working interval [{lo}, {hi}] does not contain x0 = {model.x0}")

    warnings: list[str] = []
    lip_s = _lipschitz_with_growth_check(model.drift, lo, hi, warnings, "drift")
    lip_g = _lipschitz_with_growth_check(model.diffusion, lo, hi, warnings, "diffusion")

    lv = limit_variance(model, path)
    if lv.sigma_limit < SIGMA_DEGENERATE_TOL:
        raise DegenerateModelError(
            f"limiting noise scale is numerically zero ({lv.sigma_limit:.3g}); "
            "the normalized statistic is undefined for this model"
        )
    a3_ok = lv.sigma_limit > 0
    if model.eps ** 2 >= 0.5:
        warnings.append(
            f"eps = {model.eps} is large for the small-noise asymptotics; "
            "level accuracy may be poor"
        )
    return ValidationReport(
        lipschitz_drift=lip_s,
        lipschitz_sigma=lip_g,
        sigma_limit=lv.sigma_limit,
        a3_ok=a3_ok,
        working_interval=(float(lo), float(hi)),
        warnings=warnings,
    )
