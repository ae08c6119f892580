"""Numeric kernels: Euler-Maruyama batches, RK4, Brownian-supremum scans.

Each kernel exists twice: a numba-compiled loop (default) and a
pure-numpy version vectorized across replications.  Dispatchers take an
optional ``use_numba`` override so tests and benchmarks can exercise
both paths in one process; ``None`` means the process-wide backend.

Drift and diffusion arrive as compiled stack programs (see expr.py), so
one kernel body serves every user expression.  Inside kernels domain
faults surface as NaN/inf and are caught by the state checks; the
Python wrappers in model.py and simulate.py turn bad status values into
exceptions.
"""

from __future__ import annotations

import numpy as np

from .backend import HAS_NUMBA
from .expr import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_TANH,
    OP_X,
    Program,
)

BLOWUP_GUARD = 1e10


def _pick(use_numba):
    if use_numba is None:
        return HAS_NUMBA
    if use_numba and not HAS_NUMBA:
        raise RuntimeError(
            "numba backend requested explicitly but it is not available "
            "in this process (import failed or SMALLDRIFT_NO_NUMBA set)")
    return bool(use_numba)


# --- pure-numpy implementations ----------------------------------------

def _eval_vec_nofault(prog: Program, x: np.ndarray) -> np.ndarray:
    # Same machine as expr.eval_program but NaN/inf propagate freely;
    # the state checks in the callers are the error path.
    stack = np.empty((prog.stack_need, x.shape[0]), dtype=np.float64)
    top = -1
    for op, arg in zip(prog.ops, prog.args):
        if op == OP_CONST:
            top += 1
            stack[top] = prog.consts[arg]
        elif op == OP_X:
            top += 1
            stack[top] = x
        elif op == OP_ADD or op == OP_SUB or op == OP_MUL or op == OP_DIV:
            b = stack[top]
            top -= 1
            a = stack[top]
            if op == OP_ADD:
                stack[top] = a + b
            elif op == OP_SUB:
                stack[top] = a - b
            elif op == OP_MUL:
                stack[top] = a * b
            else:
                stack[top] = a / b
        elif op == OP_NEG:
            stack[top] = -stack[top]
        elif op == OP_POW:
            a = stack[top]
            res = np.ones_like(a)
            for _ in range(arg):
                res = res * a
            stack[top] = res
        elif op == OP_SIN:
            stack[top] = np.sin(stack[top])
        elif op == OP_COS:
            stack[top] = np.cos(stack[top])
        elif op == OP_EXP:
            stack[top] = np.exp(stack[top])
        elif op == OP_ABS:
            stack[top] = np.abs(stack[top])
        elif op == OP_SQRT:
            stack[top] = np.sqrt(stack[top])
        else:
            stack[top] = np.tanh(stack[top])
    return stack[top]


def _em_batch_numpy(prog_s, prog_g, x0, eps, dt, sqrt_dt, z, obs_stride, keep_fine):
    n_reps, n_fine = z.shape
    obs = np.empty((n_reps, n_fine // obs_stride + 1), dtype=np.float64)
    fine = np.empty((n_reps, n_fine + 1), dtype=np.float64) if keep_fine else None
    status = np.full(n_reps, -1, dtype=np.int64)
    x = np.full(n_reps, x0, dtype=np.float64)
    obs[:, 0] = x0
    if keep_fine:
        fine[:, 0] = x0
    with np.errstate(all="ignore"):
        for k in range(n_fine):
            s = _eval_vec_nofault(prog_s, x)
            g = _eval_vec_nofault(prog_g, x)
            x = x + s * dt[k] + eps * g * sqrt_dt[k] * z[:, k]
            bad = ~(np.isfinite(x) & (np.abs(x) <= BLOWUP_GUARD))
            if bad.any():
                fresh = bad & (status < 0)
                status[fresh] = k + 1
                x = np.where(status >= 0, np.nan, x)
            if keep_fine:
                fine[:, k + 1] = x
            if (k + 1) % obs_stride == 0:
                obs[:, (k + 1) // obs_stride] = x
    return obs, fine, status


def _rk4_numpy(prog, x0, times):
    n = times.shape[0]
    out = np.empty(n, dtype=np.float64)
    x = np.array([x0], dtype=np.float64)
    out[0] = x0
    with np.errstate(all="ignore"):
        for i in range(n - 1):
            dt = times[i + 1] - times[i]
            k1 = _eval_vec_nofault(prog, x)
            k2 = _eval_vec_nofault(prog, x + 0.5 * dt * k1)
            k3 = _eval_vec_nofault(prog, x + 0.5 * dt * k2)
            k4 = _eval_vec_nofault(prog, x + dt * k3)
            x = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            out[i + 1] = x[0]
            if not np.isfinite(x[0]):
                out[i + 1 :] = np.nan
                return out, i + 1
    return out, -1


def _bm_sup_numpy(z, sqrt_dt):
    return sqrt_dt * np.max(np.abs(np.cumsum(z, axis=1)), axis=1)


# --- numba implementations ---------------------------------------------

if HAS_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _eval_scalar(ops, args, consts, x, stack):
        top = -1
        for i in range(ops.shape[0]):
            op = ops[i]
            if op == OP_CONST:
                top += 1
                stack[top] = consts[args[i]]
            elif op == OP_X:
                top += 1
                stack[top] = x
            elif op == OP_ADD:
                top -= 1
                stack[top] = stack[top] + stack[top + 1]
            elif op == OP_SUB:
                top -= 1
                stack[top] = stack[top] - stack[top + 1]
            elif op == OP_MUL:
                top -= 1
                stack[top] = stack[top] * stack[top + 1]
            elif op == OP_DIV:
                top -= 1
                stack[top] = stack[top] / stack[top + 1]
            elif op == OP_NEG:
                stack[top] = -stack[top]
            elif op == OP_POW:
                a = stack[top]
                res = 1.0
                for _ in range(args[i]):
                    res = res * a
                stack[top] = res
            elif op == OP_SIN:
                stack[top] = np.sin(stack[top])
            elif op == OP_COS:
                stack[top] = np.cos(stack[top])
            elif op == OP_EXP:
                stack[top] = np.exp(stack[top])
            elif op == OP_ABS:
                stack[top] = abs(stack[top])
            elif op == OP_SQRT:
                stack[top] = np.sqrt(stack[top])
            else:
                stack[top] = np.tanh(stack[top])
        return stack[top]

    @njit(cache=True, parallel=True)
    def _em_batch_numba(ops_s, args_s, consts_s, ops_g, args_g, consts_g,
                        stack_need, x0, eps, dt, sqrt_dt, z, obs_stride,
                        obs, fine, keep_fine, status):
        n_reps = z.shape[0]
        n_fine = dt.shape[0]
        for r in prange(n_reps):
            stack = np.empty(stack_need, dtype=np.float64)
            x = x0
            obs[r, 0] = x0
            if keep_fine:
                fine[r, 0] = x0
            bad = -1
            for k in range(n_fine):
                if bad < 0:
                    s = _eval_scalar(ops_s, args_s, consts_s, x, stack)
                    g = _eval_scalar(ops_g, args_g, consts_g, x, stack)
                    x = x + s * dt[k] + eps * g * sqrt_dt[k] * z[r, k]
                    if not (np.isfinite(x) and abs(x) <= BLOWUP_GUARD):
                        bad = k + 1
                        x = np.nan
                if keep_fine:
                    fine[r, k + 1] = x
                if (k + 1) % obs_stride == 0:
                    obs[r, (k + 1) // obs_stride] = x
            status[r] = bad

    @njit(cache=True)
    def _rk4_numba(ops, args, consts, stack_need, x0, times, out):
        stack = np.empty(stack_need, dtype=np.float64)
        x = x0
        out[0] = x0
        for i in range(times.shape[0] - 1):
            dt = times[i + 1] - times[i]
            k1 = _eval_scalar(ops, args, consts, x, stack)
            k2 = _eval_scalar(ops, args, consts, x + 0.5 * dt * k1, stack)
            k3 = _eval_scalar(ops, args, consts, x + 0.5 * dt * k2, stack)
            k4 = _eval_scalar(ops, args, consts, x + dt * k3, stack)
            x = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            out[i + 1] = x
            if not np.isfinite(x):
                for j in range(i + 2, times.shape[0]):
                    out[j] = np.nan
                return i + 1
        return -1

    @njit(cache=True, parallel=True)
    def _bm_sup_numba(z, sqrt_dt, out):
        n_paths = z.shape[0]
        n_steps = z.shape[1]
        for p in prange(n_paths):
            acc = 0.0
            peak = 0.0
            for k in range(n_steps):
                acc += z[p, k]
                a = abs(acc)
                if a > peak:
                    peak = a
            out[p] = peak * sqrt_dt


# --- dispatchers -------------------------------------------------------

def em_batch(prog_s: Program, prog_g: Program, x0: float, eps: float,
             dt: np.ndarray, z: np.ndarray, obs_stride: int,
             keep_fine: bool = False, use_numba=None):
    """Euler-Maruyama for a batch of paths sharing one fine grid.

    ``z`` is (n_reps, n_fine) standard normals; ``dt`` the fine interval
    widths; every ``obs_stride``-th fine point is an observation.
    Returns (obs_values, fine_values or None, status) where status[r] is
    -1 for a clean path, else the first non-finite fine index.
    """
    sqrt_dt = np.sqrt(dt)
    if not _pick(use_numba):
        return _em_batch_numpy(prog_s, prog_g, x0, eps, dt, sqrt_dt, z,
                               obs_stride, keep_fine)
    n_reps, n_fine = z.shape
    obs = np.empty((n_reps, n_fine // obs_stride + 1), dtype=np.float64)
    fine = np.empty((n_reps, n_fine + 1), dtype=np.float64) if keep_fine \
        else np.empty((1, 1), dtype=np.float64)
    status = np.empty(n_reps, dtype=np.int64)
    stack_need = max(prog_s.stack_need, prog_g.stack_need)
    _em_batch_numba(prog_s.ops, prog_s.args, prog_s.consts,
                    prog_g.ops, prog_g.args, prog_g.consts,
                    stack_need, float(x0), float(eps), dt, sqrt_dt, z,
                    obs_stride, obs, fine, keep_fine, status)
    return obs, (fine if keep_fine else None), status


def rk4_path(prog: Program, x0: float, times: np.ndarray, use_numba=None):
    """Classic RK4 for dx/dt = f(x) on the given time grid.

    Returns (values, bad_index) with bad_index -1 when every state is
    finite, else the index of the first non-finite one.
    """
    if not _pick(use_numba):
        return _rk4_numpy(prog, float(x0), times)
    out = np.empty(times.shape[0], dtype=np.float64)
    bad = _rk4_numba(prog.ops, prog.args, prog.consts, prog.stack_need,
                     float(x0), times, out)
    return out, int(bad)


def bm_sup_batch(z: np.ndarray, dt: float, use_numba=None) -> np.ndarray:
    """Per-path supremum of |sum of sqrt(dt)-scaled increments|.

    ``z`` is (n_paths, n_steps) standard normals for a uniform grid of
    width ``dt``; the result is max_k |B_{t_k}| for each discretized
    Brownian path.
    """
    sqrt_dt = float(np.sqrt(dt))
    if not _pick(use_numba):
        return _bm_sup_numpy(z, sqrt_dt)
    out = np.empty(z.shape[0], dtype=np.float64)
    _bm_sup_numba(z, sqrt_dt, out)
    return out
