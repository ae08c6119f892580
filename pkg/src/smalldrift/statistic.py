"""Test statistic, its variance normalization, and diagnostic fields.

The core object is the cumulative residual field

    U(u) = (1/eps) * sum over t_i <= u of [X_{t_i} - X_{t_{i-1}} - S0(X_{t_{i-1}}) dt_i]

whose supremum, divided by the realized noise scale Sigma_hat, converges
under the null to sup of |Brownian motion| on [0, 1] whatever (S0, sigma)
are.  V and M are the finite-resolution intermediaries of the limit
argument (drift integrals refined within observation intervals, then the
field evaluated on the fine grid); they exist for convergence
diagnostics and need fine-resolved paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import DegeneratePathError
from .expr import Expression
from .limitdist import SupAbsBmDistribution
from .model import ModelSpec, solve_ode
from .simulate import ObservedPath

SIGMA_HAT_DEGENERATE_TOL = 1e-12
SEPARATION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TestCurve:
    """A cumulative field evaluated at its grid; piecewise constant in u."""

    u_grid: np.ndarray
    values: np.ndarray
    sup_abs: float

    def value_at(self, u: float) -> float:
        """Field value at an arbitrary u (right-continuous step lookup)."""
        if u < self.u_grid[0] or u > self.u_grid[-1]:
            raise ValueError(f"u = {u} outside [{self.u_grid[0]}, {self.u_grid[-1]}]")
        idx = int(np.searchsorted(self.u_grid, u, side="right")) - 1
        return float(self.values[idx])


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_hat: float
    n_increments: int


@dataclass(frozen=True, eq=False)
class TestReport:
    curve: TestCurve
    variance: VarianceEstimate
    statistic: float
    p_value: float
    alpha: float
    reject: bool
    critical_value: float
    n_obs: int
    eps: float

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "sigma_hat": self.variance.sigma_hat,
            "sup_u": self.curve.sup_abs,
            "n_obs": self.n_obs,
            "eps": self.eps,
        }


def _curve(u_grid: np.ndarray, cumulative: np.ndarray) -> TestCurve:
    values = np.concatenate(([0.0], cumulative))
    return TestCurve(u_grid=u_grid, values=values,
                     sup_abs=float(np.max(np.abs(values))))


def u_statistic(path: ObservedPath, null_drift: Expression) -> TestCurve:
    """The observed residual field U against the hypothesized drift."""
    _check_path(path)
    x = path.values
    dt = np.diff(path.grid.times)
    s0 = null_drift.eval_many(x[:-1])
    cum = np.cumsum(np.diff(x) - s0 * dt) / path.eps
    return _curve(path.grid.times, cum)


def sigma_hat(path: ObservedPath) -> VarianceEstimate:
    """Realized noise scale sqrt(eps^-2 * sum of squared increments)."""
    _check_path(path)
    dx = np.diff(path.values)
    return VarianceEstimate(
        sigma_hat=math.sqrt(float(np.sum(dx * dx))) / path.eps,
        n_increments=dx.shape[0])


def run_test(path: ObservedPath, null_drift: Expression, alpha: float,
             dist: SupAbsBmDistribution | None = None) -> TestReport:
    """Normalized sup test of H0: drift = null_drift at level alpha.

    Rejects when D = sup|U|/Sigma_hat exceeds the upper-alpha quantile
    of sup|B| (strict inequality; ties have probability zero).
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if dist is None:
        dist = SupAbsBmDistribution()
    curve = u_statistic(path, null_drift)
    variance = sigma_hat(path)
    if variance.sigma_hat < SIGMA_HAT_DEGENERATE_TOL:
        raise DegeneratePathError(
            f"realized noise scale {variance.sigma_hat:.3g} is numerically "
            "zero; the statistic cannot be normalized (constant data?)")
    statistic = curve.sup_abs / variance.sigma_hat
    p_value = dist.p_value(statistic)
    critical_value = dist.quantile(1.0 - alpha)
    reject = statistic > critical_value
    # One monotone CDF produces p, the critical value, and the decision,
    # so the three must agree; a mismatch is an internal bug.
    assert reject == (p_value < alpha), (statistic, p_value, critical_value, alpha)
    return TestReport(curve=curve, variance=variance, statistic=statistic,
                      p_value=p_value, alpha=alpha, reject=reject,
                      critical_value=critical_value,
                      n_obs=path.values.shape[0], eps=path.eps)


def _fine_arrays(path: ObservedPath):
    if not path.has_fine:
        raise ValueError("this diagnostic needs a path simulated with keep_fine")
    n_obs = path.grid.times.shape[0] - 1
    n_fine = path.fine_times.shape[0] - 1
    substeps = n_fine // n_obs
    if substeps * n_obs != n_fine:
        raise ValueError("fine grid does not evenly refine the observation grid")
    return path.fine_times, path.fine_values, substeps


def _fine_drift_increments(path: ObservedPath, null_drift: Expression):
    fine_t, fine_x, substeps = _fine_arrays(path)
    s0 = null_drift.eval_many(fine_x[:-1])
    return fine_t, fine_x, substeps, s0 * np.diff(fine_t)


def v_statistic(path: ObservedPath, null_drift: Expression) -> TestCurve:
    """U with the null drift term refined: per observation interval, the
    drift contribution is the left-point Riemann sum over the fine grid."""
    _check_path(path)
    _, _, substeps, drift_inc = _fine_drift_increments(path, null_drift)
    per_interval = drift_inc.reshape(-1, substeps).sum(axis=1)
    cum = np.cumsum(np.diff(path.values) - per_interval) / path.eps
    return _curve(path.grid.times, cum)


def m_statistic(path: ObservedPath, null_drift: Expression) -> TestCurve:
    """The residual field accumulated on the fine grid itself."""
    _check_path(path)
    fine_t, fine_x, _, drift_inc = _fine_drift_increments(path, null_drift)
    cum = np.cumsum(np.diff(fine_x) - drift_inc) / path.eps
    return _curve(fine_t, cum)


def drift_discrepancy(path: ObservedPath, alt_drift: Expression,
                      null_drift: Expression) -> TestCurve:
    """The drift part of U under an alternative: cumulative
    (S - S0)(X_{t_{i-1}}) dt_i, scaled by 1/eps."""
    _check_path(path)
    x = path.values
    dt = np.diff(path.grid.times)
    gap = alt_drift.eval_many(x[:-1]) - null_drift.eval_many(x[:-1])
    return _curve(path.grid.times, np.cumsum(gap * dt) / path.eps)


@dataclass(frozen=True, eq=False)
class SeparationResult:
    """The deterministic discrepancy integral along the alternative's ODE
    path; nonzero max_abs certifies the alternative is detectable."""

    curve: TestCurve
    u_star: float
    max_abs: float
    separated: bool


def separation_curve(alt_drift: Expression, null_drift: Expression,
                     model_with_alt: ModelSpec,
                     ode_step: float | None = None) -> SeparationResult:
    """Integral of (S - S0) along the ODE path x of the alternative drift.

    Simpson quadrature on the ODE grid; max_abs below 1e-10 sets the
    not-separated flag (the test has no power against such an S).
    """
    path = solve_ode(model_with_alt, step=ode_step)
    gap = alt_drift.eval_many(path.values) - null_drift.eval_many(path.values)
    cum = cumulative_simpson(gap, x=path.times, initial=0.0)
    sup_abs = float(np.max(np.abs(cum)))
    curve = TestCurve(u_grid=path.times, values=cum, sup_abs=sup_abs)
    u_star = float(path.times[int(np.argmax(np.abs(cum)))])
    return SeparationResult(curve=curve, u_star=u_star, max_abs=sup_abs,
                            separated=sup_abs >= SEPARATION_TOL)


def write_curve_csv(curve: TestCurve, stream) -> None:
    """Write a curve as ``u,value`` rows for external plotting."""
    stream.write("u,value\n")
    for u, v in zip(curve.u_grid, curve.values):
        stream.write(f"{float(u)!r},{float(v)!r}\n")


def _check_path(path: ObservedPath) -> None:
    if path.values.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    if not path.eps > 0:
        raise ValueError(f"eps must be positive, got {path.eps}")
