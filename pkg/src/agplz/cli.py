"""
Command-line interface: ``agplz <subcommand> [flags]``.

Exit codes: 0 success, 1 numerical failure (the error class is printed),
2 bad flags, 3 sweep finished with some failed cells (written as ``NaN``).
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import AgplzError

SWEEP_METHODS = ("ode_diabatic", "ode_adiabatic", "ddp_closed", "ddp_quadrature")
SWEEP_DEFAULTS = {
    "deltas": "0.35,0.4,0.45,0.5,0.55,0.6",
    "etas": "0,0.25,0.5,0.75",
    "methods": ",".join(SWEEP_METHODS),
    "tau_max": "200",
    "tol": "1e-10",
    "workers": "1",
}


class UsageError(Exception):
    """Raised inside a command for invalid flag values; mapped to exit code 2."""


def _fmt(x) -> str:
    """Shortest round-trip decimal form; ``NaN`` for missing values."""
    if x is None:
        return "NaN"
    x = float(x)
    if math.isnan(x):
        return "NaN"
    return repr(x)


def _floats(text: str) -> List[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc
    if not vals:
        raise UsageError("empty list")
    return vals


def _params(args):
    from .model import AdiabaticParams

    try:
        return AdiabaticParams(args.delta, args.eta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _check_tol(tol):
    from .tdse import TOL_RANGE

    if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
        raise UsageError(f"--tol must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]")


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    from .tdse import transition_probability

    p = _params(args)
    _check_tol(args.tol)
    if args.tau_max < 50:
        raise UsageError("--tau-max must be >= 50")
    rep = transition_probability(p, args.tau_max, args.tol, args.frame, args.integrator)
    out = rep.as_dict()
    out.update(delta=p.delta, eta=p.eta)
    _emit(args, out)
    return 0


def cmd_predict(args) -> int:
    from .ddp import predict_probability

    p = _params(args)
    method = args.method.replace("-", "_")
    _emit(args, predict_probability(p, method).as_dict())
    return 0


def cmd_branch_points(args) -> int:
    from .ddp import branch_points

    bp = branch_points(_params(args))
    _emit(args, {
        "delta": args.delta,
        "eta": args.eta,
        "upper": [[t.real, t.imag] for t in bp.upper],
        "pole": [bp.pole.real, bp.pole.imag],
        "collapsed": bp.collapsed,
        "residuals": list(bp.residuals),
    })
    return 0


def cmd_holonomy(args) -> int:
    from .ddp import holonomy
    from .model import SIGMA_Y

    p = _params(args)
    M = holonomy(p, args.radius)
    ref = (math.cos(p.eta * math.pi / 2) * np.eye(2)
           + 1j * math.sin(p.eta * math.pi / 2) * SIGMA_Y)
    _emit(args, {
        "delta": p.delta,
        "eta": p.eta,
        "radius": args.radius,
        "matrix_re": M.real.tolist(),
        "matrix_im": M.imag.tolist(),
        "max_error_vs_closed_form": float(np.abs(M - ref).max()),
    })
    return 0


def cmd_flatness(args) -> int:
    from . import integrability as ig

    if args.model != "gaudin":
        raise UsageError("only --model gaudin is available")
    eps = _floats(args.eps)
    if len(eps) != args.spins:
        raise UsageError(f"--eps needs {args.spins} values")
    try:
        f = ig.gaudin_family(args.spins, args.B)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.perturb:
        f = ig.perturbed(f, args.perturb)
    rep = ig.flatness_residual(f, eps, args.fd_step)
    if not args.perturb:
        rep = ig.corrected_flatness_residual(f, eps, args.fd_step, args.nested_step)
    out = rep.as_dict()
    out["model"] = "gaudin"
    out["spins"] = args.spins
    out["B"] = args.B
    out["perturb"] = args.perturb
    out["tol_fd"] = 1e3 * args.fd_step
    _emit(args, out)
    return 0


def _grid_kwargs(args):
    n_re, n_im = args.n_re, args.n_im
    if args.refine:
        from .field import refined_shape

        n_re, n_im = refined_shape(n_re, n_im)
    if n_re < 2 or n_im < 2:
        raise UsageError("grid needs at least 2 points per axis")
    return dict(re_range=(args.re_min, args.re_max), im_range=(args.im_min, args.im_max),
                n_re=n_re, n_im=n_im)


def cmd_delta_field(args) -> int:
    from .field import delta_field

    fg = delta_field(_params(args), **_grid_kwargs(args))
    if args.out:
        fg.to_csv(args.out)
    else:
        fg.to_csv(sys.stdout)
    return 0


def cmd_level_lines(args) -> int:
    from .field import delta_field, level_lines, lines_to_svg

    fg = delta_field(_params(args), **_grid_kwargs(args))
    if args.levels:
        levels = _floats(args.levels)
    else:
        vals = fg.values[~fg.mask]
        levels = np.linspace(vals.min(), vals.max(), args.n_levels + 2)[1:-1].tolist()
    svg = lines_to_svg(level_lines(fg, levels), fg)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)
    return 0


def _sweep_task(task):
    """One ``(delta, eta, method)`` cell; returns a dict, never raises."""
    delta, eta, method, tau_max, tol = task
    from .ddp import predict_probability
    from .model import AdiabaticParams
    from .tdse import transition_probability

    try:
        p = AdiabaticParams(delta, eta)
        if method.startswith("ode_"):
            rep = transition_probability(p, tau_max, tol, method[4:])
            return {"P": rep.P, "norm_drift": rep.norm_drift, "n_steps": rep.n_steps}
        kind = "closed_form" if method == "ddp_closed" else "quadrature"
        return {"P": predict_probability(p, kind).P_pred}
    except (AgplzError, ValueError, ArithmeticError) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def _read_config(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in SWEEP_DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {k!r}")
            out[k] = v
    return out


def resolve_sweep_settings(args) -> dict:
    """Merge flags over config-file values over defaults."""
    conf = _read_config(args.config)
    merged = {}
    for key, default in SWEEP_DEFAULTS.items():
        flag = getattr(args, key, None)
        merged[key] = str(flag) if flag is not None else conf.get(key, default)
    methods = [m.strip() for m in merged["methods"].split(",") if m.strip()]
    bad = [m for m in methods if m not in SWEEP_METHODS]
    if bad or not methods:
        raise UsageError(f"unknown sweep methods {bad}; choose from {', '.join(SWEEP_METHODS)}")
    try:
        tau_max, tol, workers = float(merged["tau_max"]), float(merged["tol"]), int(merged["workers"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _check_tol(tol)
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    deltas, etas = _floats(merged["deltas"]), _floats(merged["etas"])
    if any(d <= 0 for d in deltas):
        raise UsageError("deltas must be positive")
    if any(not 0 <= e <= 1 for e in etas):
        raise UsageError("etas must lie in [0, 1]")
    return dict(deltas=sorted(set(deltas)), etas=sorted(set(etas)), methods=methods,
                tau_max=tau_max, tol=tol, workers=workers)


def run_sweep(settings: dict):
    """Rows ``(delta, eta, {method: result})`` in ``(delta, eta)`` order."""
    tasks = [(d, e, m, settings["tau_max"], settings["tol"])
             for d in settings["deltas"] for e in settings["etas"] for m in settings["methods"]]
    if settings["workers"] == 1:
        results = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=settings["workers"]) as pool:
            results = list(pool.map(_sweep_task, tasks))
    rows = []
    it = iter(results)
    for d in settings["deltas"]:
        for e in settings["etas"]:
            rows.append((d, e, {m: next(it) for m in settings["methods"]}))
    return rows


def sweep_csv(rows, methods) -> str:
    header = ["delta", "eta"] + [f"P_{m}" for m in methods] + ["norm_drift", "n_steps"]
    lines = [",".join(header)]
    for d, e, res in rows:
        cells = [_fmt(d), _fmt(e)] + [_fmt(res[m].get("P")) for m in methods]
        ode = next((res[m] for m in methods if m.startswith("ode_") and "P" in res[m]), {})
        cells.append(_fmt(ode.get("norm_drift")))
        n = ode.get("n_steps")
        cells.append("NaN" if n is None else str(int(n)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    settings = resolve_sweep_settings(args)
    t0 = time.time()
    rows = run_sweep(settings)
    text = sweep_csv(rows, settings["methods"])
    failures = [(d, e, m, r["error"]) for d, e, res in rows for m, r in res.items() if "error" in r]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        meta = {
            "settings": settings,
            "started_unix": t0,
            "elapsed_s": time.time() - t0,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "agplz": __version__,
            "failures": [list(f) for f in failures],
        }
        with open(args.out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    else:
        sys.stdout.write(text)
    for d, e, m, msg in failures:
        print(f"sweep: delta={d!r} eta={e!r} {m}: {msg}", file=sys.stderr)
    return 3 if failures else 0


def cmd_verify(args) -> int:
    from .acceptance import format_table, run_all

    results = run_all(quick=args.quick)
    print(format_table(results))
    n_fail = sum(not r.ok for r in results)
    print(f"\n{len(results) - n_fail}/{len(results)} criteria passed")
    return 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# parser


def _common_flags(tau_max=200.0, tol=1e-10) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--delta", type=float, default=0.5, help="adiabatic parameter (> 0)")
    common.add_argument("--eta", type=float, default=0.0, help="gauge-potential strength in [0, 1]")
    common.add_argument("--tau-max", type=float, default=tau_max, help="half-width of the time window")
    common.add_argument("--tol", type=float, default=tol, help="integrator tolerance")
    common.add_argument("--out", help="output path")
    common.add_argument("--workers", type=int, default=None, help="worker processes (sweep only)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--re-min", type=float, default=-2.5)
    grid.add_argument("--re-max", type=float, default=2.5)
    grid.add_argument("--im-min", type=float, default=0.0)
    grid.add_argument("--im-max", type=float, default=2.2)
    grid.add_argument("--n-re", type=int, default=400)
    grid.add_argument("--n-im", type=int, default=300)
    grid.add_argument("--refine", action="store_true", help="halve the grid spacing (old nodes kept)")

    parser = argparse.ArgumentParser(prog="agplz", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"agplz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="integrate the TDSE and report P")
    s.add_argument("--frame", choices=("diabatic", "adiabatic"), default="diabatic")
    s.add_argument("--integrator", choices=("dop853", "dopri5"), default="dop853")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("predict", parents=[common], help="complex-time prediction of P")
    s.add_argument("--method", choices=("closed-form", "quadrature"), default="closed-form")
    s.set_defaults(func=cmd_predict)

    # None defaults let config-file values show through unless a flag is given
    s = sub.add_parser("sweep", parents=[_common_flags(None, None)], help="grid of (delta, eta) values to CSV")
    s.add_argument("--deltas", help="comma-separated delta values")
    s.add_argument("--etas", help="comma-separated eta values")
    s.add_argument("--methods", help=f"comma-separated subset of {','.join(SWEEP_METHODS)}")
    s.add_argument("--config", help="key=value file (flags take precedence)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("delta-field", parents=[common, grid], help="Delta(tau) grid to CSV")
    s.set_defaults(func=cmd_delta_field)

    s = sub.add_parser("level-lines", parents=[common, grid], help="level lines of Delta(tau) to SVG")
    s.add_argument("--levels", help="comma-separated level values")
    s.add_argument("--n-levels", type=int, default=15, help="evenly spaced levels when --levels is absent")
    s.set_defaults(func=cmd_level_lines)

    s = sub.add_parser("branch-points", parents=[common], help="eigenvalue branch points")
    s.set_defaults(func=cmd_branch_points)

    s = sub.add_parser("holonomy", parents=[common], help="loop matrix around the pole at i")
    s.add_argument("--radius", type=float, default=0.5)
    s.set_defaults(func=cmd_holonomy)

    s = sub.add_parser("flatness", parents=[common], help="flatness residuals of a commuting family")
    s.add_argument("--model", default="gaudin")
    s.add_argument("--spins", type=int, choices=(2, 3), default=2)
    s.add_argument("--B", type=float, default=1.0)
    s.add_argument("--eps", default="0,1", help="comma-separated site parameters")
    s.add_argument("--perturb", type=float, default=0.0, help="sigma_x strength added to H_2 on spin 1")
    s.add_argument("--fd-step", type=float, default=1e-5)
    s.add_argument("--nested-step", type=float, default=1e-4)
    s.set_defaults(func=cmd_flatness)

    s = sub.add_parser("verify", help="run the acceptance suite")
    s.add_argument("--quick", action="store_true", help="fast subset")
    s.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except AgplzError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
