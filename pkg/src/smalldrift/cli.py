"""Command-line interface.

Commands map one-to-one onto library operations: test, simulate,
quantile, pvalue, size, power, sweep, validate.  Machine-readable JSON
goes to --out (default stdout) with floats at 17 significant digits;
short human summaries go to stderr rounded to 4.  Exit codes: 0 success
or accept, 1 usage error, 2 runtime or data error, 3 test rejection (a
signal, not an error, so shell pipelines can branch on the outcome).

Reproducibility: identical invocations (including --seed) produce
byte-identical JSON except the single ``timestamp`` field, which also
carries the wall-clock duration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import harness, limitdist, statistic
from .errors import DataFormatError, ParseError, SmallDriftError
from .expr import parse
from .model import ModelSpec, validate
from .simulate import ObservedPath, SamplingGrid, make_grid, simulate_path, write_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_REJECT = 3


# --- JSON rendering (17 significant digits, stable layout) -------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {render_json(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot render {type(obj).__name__} as JSON")


def _timestamp(wall_seconds: float) -> str:
    return f"{datetime.now(timezone.utc).isoformat()} wall={wall_seconds:.6f}s"


def _emit(doc: dict, out_path: str | None) -> None:
    text = render_json(doc) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as f:
            f.write(text)


def _say(message: str) -> None:
    sys.stderr.write(message + "\n")


# --- CSV ingestion -----------------------------------------------------

def parse_path_csv(stream, eps: float) -> ObservedPath:
    """Read an observed path from ``t,x`` CSV.

    Times must be strictly increasing with the first exactly 0; eps is
    a modeling input, never a data column.  Attaches a sampling-scheme
    warning when the mesh exceeds eps^2.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"--eps must lie in (0, 1], got {eps}")
    header = stream.readline()
    if header.strip() != "t,x":
        raise DataFormatError(
            f"line 1: expected header 't,x', got {header.strip()!r}")
    times: list[float] = []
    values: list[float] = []
    for lineno, line in enumerate(stream, start=2):
        if not line.strip():
            continue
        parts = line.strip().split(",")
        if len(parts) != 2:
            raise DataFormatError(
                f"line {lineno}: expected two comma-separated values, "
                f"got {line.strip()!r}")
        try:
            t, x = float(parts[0]), float(parts[1])
        except ValueError:
            raise DataFormatError(
                f"line {lineno}: not a pair of decimal floats: {line.strip()!r}")
        if not (math.isfinite(t) and math.isfinite(x)):
            raise DataFormatError(f"line {lineno}: non-finite value")
        if not times:
            if t != 0.0:
                raise DataFormatError(
                    f"line {lineno}: first observation time must be 0, got {t!r}")
        elif t <= times[-1]:
            raise DataFormatError(
                f"line {lineno}: time {t!r} does not increase past {times[-1]!r}")
        times.append(t)
        values.append(x)
    if len(times) < 2:
        raise DataFormatError(f"need at least 2 observations, got {len(times)}")
    t_arr = np.array(times, dtype=np.float64)
    mesh = float(np.max(np.diff(t_arr)))
    scheme_ok = mesh <= eps * eps
    warning = None
    if not scheme_ok:
        warning = (f"mesh {mesh:g} exceeds eps^2 = {eps * eps:g}; the "
                   "sampling scheme h = o(eps^2) looks violated and the "
                   "asymptotic law may be inaccurate")
    grid = SamplingGrid(times=t_arr, mesh=mesh, scheme_ok=scheme_ok,
                        warning=warning)
    return ObservedPath(grid=grid, values=np.array(values, dtype=np.float64),
                        eps=eps, seed=0)


# --- argument plumbing -------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}")


def _apply_config(argv: list[str]) -> list[str]:
    # --config <json> mirrors flags: synthesized tokens go right after
    # the command, so explicitly typed flags still win.
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    with open(argv[i + 1]) as f:
        conf = json.load(f)
    if not isinstance(conf, dict):
        raise ValueError("--config file must hold a JSON object of flags")
    rest = argv[:i] + argv[i + 2:]
    tokens: list[str] = []
    for key, value in conf.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                tokens.append(flag)
        elif isinstance(value, list):
            tokens.append(flag + "=" + ",".join(str(v) for v in value))
        else:
            # the = form keeps values like "-x" from being read as flags
            tokens.append(f"{flag}={value}")
    return rest[:1] + tokens + rest[1:]


def build_parser() -> _Parser:
    parser = _Parser(prog="smalldrift",
                     description="Goodness-of-fit test for the drift of a "
                                 "small-noise diffusion observed discretely.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", parents=[], help="run the drift test on CSV data")
    p.add_argument("--data", required=True, help="CSV file with header t,x")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--null-drift", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.add_argument("--curve-out", default=None, help="write the U curve as u,value CSV")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("simulate", help="simulate one observed path to CSV")
    p.add_argument("--drift", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, default=2.5)
    p.add_argument("--layout", choices=("uniform", "jittered"), default="uniform")
    p.add_argument("--substeps", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--meta", default=None,
                   help="sidecar JSON path (default <out>.meta.json)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("quantile", help="critical value of sup|B|")
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=_cmd_quantile)

    p = sub.add_parser("pvalue", help="p-value of an observed statistic")
    p.add_argument("--d", type=float, required=True)
    p.set_defaults(func=_cmd_pvalue)

    for name, default_reps, needs_alt, default_substeps in (
            ("size", 2000, False, 4), ("power", 1000, True, 4),
            ("sweep", 200, False, 8)):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--null-drift", required=True)
        if needs_alt:
            p.add_argument("--alt-drift", required=True)
        p.add_argument("--sigma", required=True)
        p.add_argument("--x0", type=float, required=True)
        p.add_argument("--t", type=float, required=True)
        p.add_argument("--eps", type=_eps_list, required=True,
                       help="eps value or comma-separated list")
        p.add_argument("--gamma", type=float, default=2.5)
        p.add_argument("--substeps", type=int, default=default_substeps)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--reps", type=int, default=default_reps)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--csv-out", default=None, help="also write the rows as CSV")
        p.set_defaults(func=_cmd_experiment, experiment=name)

    p = sub.add_parser("validate", help="check model regularity numerically")
    p.add_argument("--drift", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate)

    return parser


# --- commands ----------------------------------------------------------

def _cmd_test(ns) -> int:
    t0 = time.perf_counter()
    with open(ns.data) as f:
        path = parse_path_csv(f, ns.eps)
    report = statistic.run_test(path, parse(ns.null_drift), ns.alpha)
    if ns.curve_out is not None:
        with open(ns.curve_out, "w") as f:
            statistic.write_curve_csv(report.curve, f)
    doc = {
        "command": "test",
        "config": {"data": ns.data, "eps": ns.eps, "null_drift": ns.null_drift,
                   "alpha": ns.alpha},
        **report.to_json_dict(),
        "critical_value": report.critical_value,
        "mesh": path.grid.mesh,
        "warnings": [path.grid.warning] if path.grid.warning else [],
        "timestamp": _timestamp(time.perf_counter() - t0),
    }
    _emit(doc, ns.out)
    if report.reject:
        _say(f"reject H0 at alpha={ns.alpha:.4g}: D={report.statistic:.4f} > "
             f"{report.critical_value:.4f} (p={report.p_value:.4f})")
        return EXIT_REJECT
    _say(f"no evidence against H0 at alpha={ns.alpha:.4g}: "
         f"D={report.statistic:.4f} (p={report.p_value:.4f})")
    return EXIT_OK


def _cmd_simulate(ns) -> int:
    t0 = time.perf_counter()
    model = ModelSpec(drift=parse(ns.drift), diffusion=parse(ns.sigma),
                      x0=ns.x0, T=ns.t, eps=ns.eps)
    grid = make_grid(ns.t, ns.eps, ns.gamma, layout=ns.layout, seed=ns.seed)
    path = simulate_path(model, grid, substeps=ns.substeps, seed=ns.seed)
    if ns.out is None:
        write_csv(path, sys.stdout)
    else:
        with open(ns.out, "w") as f:
            write_csv(path, f)
    meta_path = ns.meta
    if meta_path is None and ns.out is not None:
        meta_path = ns.out + ".meta.json"
    if meta_path is not None:
        doc = {
            "command": "simulate",
            "config": {"drift": ns.drift, "sigma": ns.sigma, "x0": ns.x0,
                       "T": ns.t, "eps": ns.eps, "gamma": ns.gamma,
                       "layout": ns.layout, "substeps": ns.substeps,
                       "seed": ns.seed},
            "n_obs": int(path.values.shape[0]),
            "mesh": path.grid.mesh,
            "scheme_ok": path.grid.scheme_ok,
            "warnings": [path.grid.warning] if path.grid.warning else [],
            "timestamp": _timestamp(time.perf_counter() - t0),
        }
        _emit(doc, meta_path)
    _say(f"simulated {path.values.shape[0]} observations "
         f"(mesh {path.grid.mesh:.4g})")
    return EXIT_OK


def _cmd_quantile(ns) -> int:
    sys.stdout.write(_fmt_float(limitdist.quantile(ns.p)) + "\n")
    return EXIT_OK


def _cmd_pvalue(ns) -> int:
    sys.stdout.write(_fmt_float(limitdist.p_value(ns.d)) + "\n")
    return EXIT_OK


def _cmd_experiment(ns) -> int:
    model = ModelSpec(drift=parse(ns.null_drift), diffusion=parse(ns.sigma),
                      x0=ns.x0, T=ns.t, eps=ns.eps[0])
    cfg = harness.ExperimentConfig(
        model=model, null_drift=parse(ns.null_drift),
        alt_drift=parse(ns.alt_drift) if getattr(ns, "alt_drift", None) else None,
        gamma=ns.gamma, substeps=ns.substeps, replications=ns.reps,
        alpha=ns.alpha, base_seed=ns.seed, eps_list=ns.eps)
    if ns.experiment == "size":
        report = harness.run_size_experiment(cfg)
    elif ns.experiment == "power":
        report = harness.run_power_experiment(cfg)
    else:
        report = harness.run_convergence_sweep(cfg)
    doc = report.to_json_dict()
    doc["timestamp"] = _timestamp(report.wall_seconds)
    _emit(doc, ns.out)
    if ns.csv_out is not None:
        with open(ns.csv_out, "w") as f:
            f.write(report.to_csv())
    for row in report.rows:
        if ns.experiment == "sweep":
            _say(f"eps={row.eps:.4g}: sup|U-V|={row.median_sup_u_minus_v:.4g} "
                 f"sup|V-M|={row.median_sup_v_minus_m:.4g} "
                 f"sigma_err={row.median_sigma_rel_error:.4g}")
        else:
            _say(f"eps={row.eps:.4g}: rejection rate {row.rejection_rate:.4f} "
                 f"[{row.wilson_ci_lo:.4f}, {row.wilson_ci_hi:.4f}] "
                 f"({row.errors} errors)")
    return EXIT_OK


def _cmd_validate(ns) -> int:
    t0 = time.perf_counter()
    model = ModelSpec(drift=parse(ns.drift), diffusion=parse(ns.sigma),
                      x0=ns.x0, T=ns.t, eps=ns.eps)
    interval = None
    if (ns.lo is None) != (ns.hi is None):
        raise ValueError("--lo and --hi must be given together")
    if ns.lo is not None:
        interval = (ns.lo, ns.hi)
    report = validate(model, interval)
    doc = {
        "command": "validate",
        "config": {"drift": ns.drift, "sigma": ns.sigma, "x0": ns.x0,
                   "T": ns.t, "eps": ns.eps},
        "lipschitz_drift": report.lipschitz_drift,
        "lipschitz_sigma": report.lipschitz_sigma,
        "sigma_limit": report.sigma_limit,
        "a3_ok": report.a3_ok,
        "working_interval": list(report.working_interval),
        "warnings": report.warnings,
        "timestamp": _timestamp(time.perf_counter() - t0),
    }
    _emit(doc, ns.out)
    _say(f"sigma_limit={report.sigma_limit:.4f}, "
         f"Lipschitz(S)={report.lipschitz_drift:.4f}, "
         f"{len(report.warnings)} warning(s)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        argv = _apply_config(list(argv))
    except (OSError, json.JSONDecodeError, ValueError) as e:
        _say(f"smalldrift: error: {e}")
        return EXIT_USAGE
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except (ParseError, ValueError) as e:
        _say(f"smalldrift: error: {e}")
        return EXIT_USAGE
    except SmallDriftError as e:
        _say(f"smalldrift: error: {e}")
        return EXIT_RUNTIME
    except OSError as e:
        _say(f"smalldrift: error: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
