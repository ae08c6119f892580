"""Monte Carlo experiments verifying the limit theorems at desk scale.

Size runs simulate under the null drift and tally rejections; power
runs simulate under a separated alternative and test against the null;
the convergence sweep tracks the approximation fields U, V, M and the
noise-scale estimator across decreasing eps.  Every replication draws
from its own counter stream, replications are processed in fixed chunks
purely for memory, and all aggregation happens in replication order, so
a report is a pure function of its configuration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from .errors import ExperimentError
from .expr import Expression, compile_program, eval_program
from .limitdist import SupAbsBmDistribution
from .model import ModelSpec, limit_variance, solve_ode
from .simulate import fine_times_for, make_grid, simulate_batch
from .statistic import SIGMA_HAT_DEGENERATE_TOL, separation_curve

_CHUNK = 512
_WILSON_Z = float(norm.ppf(0.975))
MAX_ERROR_RATE = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    null_drift: Expression
    alt_drift: Expression | None
    gamma: float
    substeps: int
    replications: int
    alpha: float
    base_seed: int
    eps_list: tuple[float, ...]

    def __post_init__(self):
        if self.replications < 100:
            raise ValueError(
                f"need at least 100 replications, got {self.replications}")
        if not self.eps_list:
            raise ValueError("eps_list must not be empty")
        for e in self.eps_list:
            if not 0 < e <= 1:
                raise ValueError(f"each eps must lie in (0, 1], got {e}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def echo(self) -> dict:
        return {
            "model": {
                "drift": self.model.drift.to_source(),
                "diffusion": self.model.diffusion.to_source(),
                "x0": self.model.x0,
                "T": self.model.T,
                "eps": self.model.eps,
            },
            "null_drift": self.null_drift.to_source(),
            "alt_drift": None if self.alt_drift is None else self.alt_drift.to_source(),
            "gamma": self.gamma,
            "substeps": self.substeps,
            "replications": self.replications,
            "alpha": self.alpha,
            "base_seed": self.base_seed,
            "eps_list": list(self.eps_list),
        }


@dataclass(frozen=True)
class McRow:
    eps: float
    n_reps: int
    rejections: int
    acceptances: int
    errors: int
    rejection_rate: float
    wilson_ci_lo: float
    wilson_ci_hi: float
    median_statistic: float
    median_sigma_hat_error: float


@dataclass(frozen=True)
class McReport:
    kind: str
    rows: tuple[McRow, ...]
    config: dict
    wall_seconds: float
    separation_max_abs: float | None = None
    separation_u_star: float | None = None

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "config": self.config,
            "rows": [vars(r).copy() for r in self.rows],
        }
        if self.separation_max_abs is not None:
            out["separation"] = {"max_abs": self.separation_max_abs,
                                 "u_star": self.separation_u_star}
        return out

    def to_csv(self) -> str:
        header = ("eps,n_reps,rejections,acceptances,errors,rejection_rate,"
                  "wilson_ci_lo,wilson_ci_hi,median_statistic,median_sigma_hat_error")
        lines = [header]
        for r in self.rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in vars(r).values()))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SweepRow:
    eps: float
    n_reps: int
    errors: int
    median_sup_u_minus_v: float
    median_sup_v_minus_m: float
    median_sigma_rel_error: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    uv_decreasing: bool
    vm_decreasing: bool
    sigma_error_decreasing: bool
    config: dict
    wall_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "kind": "sweep",
            "config": self.config,
            "rows": [vars(r).copy() for r in self.rows],
            "trends": {
                "sup_u_minus_v_decreasing": self.uv_decreasing,
                "sup_v_minus_m_decreasing": self.vm_decreasing,
                "sigma_rel_error_decreasing": self.sigma_error_decreasing,
            },
        }

    def to_csv(self) -> str:
        header = ("eps,n_reps,errors,median_sup_u_minus_v,"
                  "median_sup_v_minus_m,median_sigma_rel_error")
        lines = [header]
        for r in self.rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in vars(r).values()))
        return "\n".join(lines) + "\n"


def wilson_interval(successes: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if n <= 0:
        raise ValueError("need n > 0")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo = max(0.0, float(center - half))
    hi = min(1.0, float(center + half))
    # at the boundary the algebra collapses exactly; do not let rounding
    # put the interval strictly inside the observed rate
    if successes == 0:
        lo = 0.0
    if successes == n:
        hi = 1.0
    return (lo, hi)


def _simulate_stats(model: ModelSpec, grid, cfg: ExperimentConfig,
                    null_prog, use_numba):
    """Per-replication sup|U|, sigma_hat, and validity over the whole run."""
    dt = np.diff(grid.times)
    sup_u = np.empty(cfg.replications)
    s_hat = np.empty(cfg.replications)
    valid = np.empty(cfg.replications, dtype=bool)
    for start in range(0, cfg.replications, _CHUNK):
        n = min(_CHUNK, cfg.replications - start)
        obs, _, _, status = simulate_batch(
            model, grid, cfg.substeps, cfg.base_seed, n, first_rep=start,
            use_numba=use_numba)
        ok = status < 0
        if not ok.all():
            obs = obs.copy()
            obs[~ok] = model.x0  # keep the vector eval finite; rows are dropped
        s0 = eval_program(null_prog, obs[:, :-1].ravel()).reshape(n, -1)
        resid = np.diff(obs, axis=1) - s0 * dt[None, :]
        sup_u[start:start + n] = np.max(np.abs(np.cumsum(resid, axis=1)), axis=1) / model.eps
        dx = np.diff(obs, axis=1)
        s_hat[start:start + n] = np.sqrt(np.sum(dx * dx, axis=1)) / model.eps
        valid[start:start + n] = ok
    return sup_u, s_hat, valid


def _tally_row(eps, sup_u, s_hat, valid, critical, sigma_true) -> McRow:
    n = sup_u.shape[0]
    usable = valid & (s_hat >= SIGMA_HAT_DEGENERATE_TOL)
    errors = int(n - np.count_nonzero(usable))
    if errors > MAX_ERROR_RATE * n:
        raise ExperimentError(
            f"{errors} of {n} replications degenerate or non-finite at "
            f"eps = {eps}; the report would not be trustworthy")
    d = sup_u[usable] / s_hat[usable]
    rejections = int(np.count_nonzero(d > critical))
    acceptances = int(d.shape[0] - rejections)
    rate = rejections / n
    lo, hi = wilson_interval(rejections, n)
    sig_err = np.abs(s_hat[usable] - sigma_true) / sigma_true
    return McRow(eps=eps, n_reps=n, rejections=rejections,
                 acceptances=acceptances, errors=errors, rejection_rate=rate,
                 wilson_ci_lo=lo, wilson_ci_hi=hi,
                 median_statistic=float(np.median(d)),
                 median_sigma_hat_error=float(np.median(sig_err)))


def _level_experiment(cfg: ExperimentConfig, generating_drift: Expression,
                      use_numba) -> list[McRow]:
    dist = SupAbsBmDistribution()
    critical = dist.quantile(1.0 - cfg.alpha)
    null_prog = compile_program(cfg.null_drift)
    rows = []
    for eps in cfg.eps_list:
        model = replace(cfg.model, drift=generating_drift, eps=eps)
        grid = make_grid(model.T, eps, cfg.gamma)
        sigma_true = limit_variance(model, solve_ode(model)).sigma_limit
        sup_u, s_hat, valid = _simulate_stats(model, grid, cfg, null_prog, use_numba)
        rows.append(_tally_row(eps, sup_u, s_hat, valid, critical, sigma_true))
    return rows


def run_size_experiment(cfg: ExperimentConfig, use_numba=None) -> McReport:
    """Empirical level: simulate under the null drift, test against it."""
    t0 = time.perf_counter()
    rows = _level_experiment(cfg, cfg.null_drift, use_numba)
    return McReport(kind="size", rows=tuple(rows), config=cfg.echo(),
                    wall_seconds=time.perf_counter() - t0)


def run_power_experiment(cfg: ExperimentConfig, use_numba=None) -> McReport:
    """Empirical power: simulate under the alternative, test the null.

    Refuses to run when the alternative is not separated from the null
    (discrepancy integral below 1e-6): the theory promises no power.
    """
    t0 = time.perf_counter()
    if cfg.alt_drift is None:
        raise ExperimentError("power experiment needs alt_drift")
    sep = separation_curve(cfg.alt_drift, cfg.null_drift,
                           replace(cfg.model, drift=cfg.alt_drift))
    if sep.max_abs <= 1e-6:
        raise ExperimentError(
            f"alternative is not separated from the null (max |A(u)| = "
            f"{sep.max_abs:.3g}); the test has no power against it")
    rows = _level_experiment(cfg, cfg.alt_drift, use_numba)
    return McReport(kind="power", rows=tuple(rows), config=cfg.echo(),
                    wall_seconds=time.perf_counter() - t0,
                    separation_max_abs=sep.max_abs,
                    separation_u_star=sep.u_star)


def run_convergence_sweep(cfg: ExperimentConfig, use_numba=None) -> SweepReport:
    """Median sup|U-V|, sup|V-M|, and relative sigma_hat error per eps.

    Needs at least three strictly decreasing eps values; fine paths are
    always retained here (V and M live on the refinement).
    """
    t0 = time.perf_counter()
    eps_list = cfg.eps_list
    if len(eps_list) < 3 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("sweep needs >= 3 strictly decreasing eps values")
    null_prog = compile_program(cfg.null_drift)
    rows = []
    for eps in eps_list:
        model = replace(cfg.model, eps=eps)
        grid = make_grid(model.T, eps, cfg.gamma)
        sigma_true = limit_variance(model, solve_ode(model)).sigma_limit
        dt_obs = np.diff(grid.times)
        fine_t = fine_times_for(grid, cfg.substeps)
        dt_fine = np.diff(fine_t)
        m = cfg.substeps
        fine_to_obs = np.arange(fine_t.shape[0]) // m
        uv = np.empty(cfg.replications)
        vm = np.empty(cfg.replications)
        sig_err = np.empty(cfg.replications)
        valid = np.empty(cfg.replications, dtype=bool)
        for start in range(0, cfg.replications, _CHUNK):
            n = min(_CHUNK, cfg.replications - start)
            obs, _, fine, status = simulate_batch(
                model, grid, cfg.substeps, cfg.base_seed, n, first_rep=start,
                keep_fine=True, use_numba=use_numba)
            ok = status < 0
            if not ok.all():
                obs = obs.copy()
                fine = fine.copy()
                obs[~ok] = model.x0
                fine[~ok] = model.x0
            sl = slice(start, start + n)
            valid[sl] = ok
            s0_obs = eval_program(null_prog, obs[:, :-1].ravel()).reshape(n, -1)
            s0_fine = eval_program(null_prog, fine[:, :-1].ravel()).reshape(n, -1)
            drift_inc_fine = s0_fine * dt_fine[None, :]
            zeros = np.zeros((n, 1))
            u_vals = np.concatenate(
                [zeros, np.cumsum(np.diff(obs, axis=1) - s0_obs * dt_obs[None, :],
                                  axis=1) / eps], axis=1)
            per_interval = drift_inc_fine.reshape(n, -1, m).sum(axis=2)
            v_vals = np.concatenate(
                [zeros, np.cumsum(np.diff(obs, axis=1) - per_interval,
                                  axis=1) / eps], axis=1)
            m_vals = np.concatenate(
                [zeros, np.cumsum(np.diff(fine, axis=1) - drift_inc_fine,
                                  axis=1) / eps], axis=1)
            uv[sl] = np.max(np.abs(u_vals - v_vals), axis=1)
            vm[sl] = np.max(np.abs(v_vals[:, fine_to_obs] - m_vals), axis=1)
            dx = np.diff(obs, axis=1)
            s_hat = np.sqrt(np.sum(dx * dx, axis=1)) / eps
            if sigma_true > 0:
                sig_err[sl] = np.abs(s_hat - sigma_true) / sigma_true
            else:
                sig_err[sl] = np.nan  # diagnostics on degenerate sigma
        errors = int(cfg.replications - np.count_nonzero(valid))
        if errors > MAX_ERROR_RATE * cfg.replications:
            raise ExperimentError(
                f"{errors} of {cfg.replications} replications non-finite at "
                f"eps = {eps}")
        rows.append(SweepRow(
            eps=eps, n_reps=cfg.replications, errors=errors,
            median_sup_u_minus_v=float(np.median(uv[valid])),
            median_sup_v_minus_m=float(np.median(vm[valid])),
            median_sigma_rel_error=float(np.median(sig_err[valid]))))
    def _decreasing(vals):
        return all(b < a for a, b in zip(vals, vals[1:]))
    return SweepReport(
        rows=tuple(rows),
        uv_decreasing=_decreasing([r.median_sup_u_minus_v for r in rows]),
        vm_decreasing=_decreasing([r.median_sup_v_minus_m for r in rows]),
        sigma_error_decreasing=_decreasing([r.median_sigma_rel_error for r in rows]),
        config=cfg.echo(),
        wall_seconds=time.perf_counter() - t0)
