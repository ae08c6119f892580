"""Discrete observation of the small-noise diffusion.

Paths follow dX = S(X)dt + eps*sigma(X)dW by Euler-Maruyama on a fine
grid that splits each observation interval into equal substeps; the
observed values are the fine-path states at the observation times
themselves, never interpolants.  The observation mesh is h = eps^gamma:
the distribution-free limit needs h = o(eps^2), so gamma > 2 is the
supported regime and gamma <= 2 only raises a warning flag.

Randomness is fully counter-addressed (see rng.py): replication r of
seed s draws from the (s, path, r) stream, so batches are reproducible
in any execution order and across thread counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import BlowupError, InsufficientSampleError
from .expr import compile_program, eval_program
from .kernels import em_batch, rk4_path
from .model import ModelSpec


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Observation times 0 = t_0 < ... < t_n = T with mesh = max gap."""

    times: np.ndarray
    mesh: float
    scheme_ok: bool
    warning: str | None = None

    @property
    def n_intervals(self) -> int:
        return self.times.shape[0] - 1


@dataclass(frozen=True, eq=False)
class ObservedPath:
    """A discretely observed path plus the noise scale it was seen under.

    ``fine_times``/``fine_values`` hold the simulation refinement when
    the caller opted in at simulation time (V/M diagnostics need them);
    external data never has them.
    """

    grid: SamplingGrid
    values: np.ndarray
    eps: float
    seed: int
    rep: int = 0
    fine_times: np.ndarray | None = None
    fine_values: np.ndarray | None = None

    @property
    def has_fine(self) -> bool:
        return self.fine_times is not None


def make_grid(T: float, eps: float, gamma: float, layout: str = "uniform",
              seed: int = 0) -> SamplingGrid:
    """Observation grid with target mesh h = eps^gamma (clamped to <= T).

    ``uniform`` gives ceil(T/h) equal intervals; ``jittered`` moves each
    interior time uniformly within +-25% of its cell (order preserved),
    drawing from the dedicated jitter stream of ``seed``.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if layout not in ("uniform", "jittered"):
        raise ValueError(f"layout must be 'uniform' or 'jittered', got {layout!r}")
    h = min(eps**gamma, T)
    if not h > 0 or T / h > 1e8:
        raise ValueError(
            f"target mesh eps^gamma = {eps}^{gamma:g} would need more than "
            "1e8 observation intervals; refine eps or gamma")
    n = math.ceil(T / h)
    times = np.linspace(0.0, T, n + 1)
    if layout == "jittered" and n > 1:
        cell = T / n
        u = rng.stream(seed, rng.PURPOSE_JITTER).random(n - 1)
        times = times.copy()
        times[1:-1] += (u - 0.5) * (0.5 * cell)
    mesh = float(np.max(np.diff(times)))
    scheme_ok = gamma > 2
    warning = None
    if not scheme_ok:
        warning = (f"mesh h = eps^{gamma:g} is not o(eps^2); the "
                   "distribution-free limit is not guaranteed at this spacing")
    return SamplingGrid(times=times, mesh=mesh, scheme_ok=scheme_ok, warning=warning)


def fine_times_for(grid: SamplingGrid, substeps: int) -> np.ndarray:
    """Fine grid splitting each observation interval into equal pieces.

    Index k*substeps lands on observation time k bit-exactly.
    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    times = grid.times
    if substeps == 1:
        return times.copy()
    offsets = np.arange(substeps, dtype=np.float64) / substeps
    fine = (times[:-1, None] + np.diff(times)[:, None] * offsets[None, :]).ravel()
    return np.append(fine, times[-1])


def simulate_batch(model: ModelSpec, grid: SamplingGrid, substeps: int,
                   seed: int, n_reps: int, first_rep: int = 0,
                   keep_fine: bool = False, use_numba=None):
    """Euler-Maruyama for replications first_rep .. first_rep+n_reps-1.

    Returns (obs_values, fine_times, fine_values, status): obs_values is
    (n_reps, n_obs); fine arrays are None unless keep_fine; status[r] is
    -1 for a clean path, else the first non-finite fine index.
    """
    fine_t = fine_times_for(grid, substeps)
    dt = np.diff(fine_t)
    n_fine = dt.shape[0]
    z = np.empty((n_reps, n_fine), dtype=np.float64)
    for j in range(n_reps):
        z[j] = rng.standard_normals(seed, rng.PURPOSE_PATH, first_rep + j, n_fine)
    obs, fine, status = em_batch(
        compile_program(model.drift), compile_program(model.diffusion),
        model.x0, model.eps, dt, z, substeps, keep_fine, use_numba)
    return obs, (fine_t if keep_fine else None), fine, status


def simulate_path(model: ModelSpec, grid: SamplingGrid, substeps: int = 4,
                  seed: int = 0, keep_fine: bool = False, rep: int = 0,
                  use_numba=None) -> ObservedPath:
    """One observed path; a pure function of (model, grid, substeps, seed, rep)."""
    if abs(float(grid.times[-1]) - model.T) > 0:
        raise ValueError(
            f"grid horizon {grid.times[-1]} does not match model T = {model.T}")
    obs, fine_t, fine, status = simulate_batch(
        model, grid, substeps, seed, 1, first_rep=rep,
        keep_fine=keep_fine, use_numba=use_numba)
    if status[0] >= 0:
        bad_time = fine_times_for(grid, substeps)[status[0]]
        raise BlowupError(
            "simulated state became non-finite or left the blow-up guard "
            f"interval |x| <= 1e10", time=float(bad_time))
    return ObservedPath(
        grid=grid, values=obs[0], eps=model.eps, seed=seed, rep=rep,
        fine_times=fine_t, fine_values=fine[0] if keep_fine else None)


@dataclass(frozen=True)
class MomentReport:
    """Fitted constants of the increment-moment bound.

    c_hat[k] is the max over observation intervals of the sample mean of
    |dX_i|^k divided by max(dt_i^k, eps^k * dt_i^(k/2)); the bound says
    these stay O(1) as (eps, h) shrink.
    """

    c2_hat: float
    c4_hat: float
    n_paths: int
    eps: float
    mesh: float


def increment_moments(paths: list[ObservedPath]) -> MomentReport:
    """Fit the increment-moment constants over a shared-grid path sample."""
    if len(paths) < 100:
        raise InsufficientSampleError(
            f"need at least 100 paths for moment fitting, got {len(paths)}")
    first = paths[0]
    for p in paths[1:]:
        if p.eps != first.eps or not np.array_equal(p.grid.times, first.grid.times):
            raise ValueError("paths must share one grid and one eps")
    values = np.stack([p.values for p in paths])
    dx = np.abs(np.diff(values, axis=1))
    dt = np.diff(first.grid.times)
    eps = first.eps
    c_hat = {}
    for k in (2, 4):
        bound = np.maximum(dt**k, eps**k * dt ** (k / 2))
        c_hat[k] = float(np.max(np.mean(dx**k, axis=0) / bound))
    return MomentReport(c2_hat=c_hat[2], c4_hat=c_hat[4], n_paths=len(paths),
                        eps=eps, mesh=first.grid.mesh)


def gronwall_violations(paths: list[ObservedPath], model: ModelSpec,
                        lipschitz_hat: float, slack: float = 0.05) -> int:
    """Count paths violating the pathwise closeness bound to the ODE path.

    For each fine-resolved path the bound is

        sup_t |X_t - x_t|  <=  exp(K*T) * sup_t |eps * int sigma(X)dW| * (1+slack)

    with K the estimated drift Lipschitz constant and the stochastic
    integral realized as the fine-grid sum of (dX_j - S(X_j)dt_j), which
    is exact for the Euler scheme.  The slack absorbs discretization of
    both sides.
    """
    count = 0
    prog = compile_program(model.drift)
    scale = math.exp(lipschitz_hat * model.T) * (1.0 + slack)
    ode_cache: dict[int, np.ndarray] = {}
    for p in paths:
        if not p.has_fine:
            raise ValueError("gronwall check needs fine-resolved paths")
        key = id(p.grid)
        if key not in ode_cache:
            ode_values, bad = rk4_path(prog, model.x0, p.fine_times)
            if bad >= 0:
                raise BlowupError("ODE state became non-finite",
                                  time=float(p.fine_times[bad]))
            ode_cache[key] = ode_values
        x_ode = ode_cache[key]
        lhs = float(np.max(np.abs(p.fine_values - x_ode)))
        drift_vals = eval_program(prog, p.fine_values[:-1])
        martingale = np.cumsum(np.diff(p.fine_values) - drift_vals * np.diff(p.fine_times))
        rhs = scale * float(np.max(np.abs(martingale)))
        if lhs > rhs:
            count += 1
    return count


def write_csv(path: ObservedPath, stream) -> None:
    """Write the observed path as ``t,x`` rows with round-trip-exact floats."""
    stream.write("t,x\n")
    for t, x in zip(path.grid.times, path.values):
        stream.write(f"{float(t)!r},{float(x)!r}\n")
