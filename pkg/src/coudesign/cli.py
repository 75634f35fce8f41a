"""Command-line interface: ``coudesign {fim,optimize,surface,simulate}``.

Exit codes are part of the interface: 0 success, 2 invalid input,
3 ``fim --verify`` mismatch, 4 criterion without an optimal design.
Errors are written to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .efficiency import efficiency_surface
from .fisher import all_params_objective, fisher_blocks, oracle_cov_fim, oracle_trend_fim
from .kernel import DENSE_MAX_N, Design, OUParams, TrendParams, TrendSpec, g_func, r_func
from .simulator import sample_paths, validate_gls
from .solver import (
    FrequencyZero,
    NonConvergence,
    optimal_cov_joint_spacing,
    optimal_omega_spacing,
    optimal_trend_spacing,
    optimize_all_params,
    reject_lambda_design,
)

EXIT_OK, EXIT_VALIDATION, EXIT_VERIFY, EXIT_NONEXISTENT = 0, 2, 3, 4
VERIFY_TOL = 1e-8
MAX_GRID_CELLS = 4_000_000
MAX_PATH_VALUES = 5_000_000
MAX_REPS = 10_000_000


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _invalid(message: str) -> CliError:
    return CliError(EXIT_VALIDATION, "validation", message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _invalid(message)


# --- number formatting / emission ------------------------------------------

def _num(x):
    """Round to 15 significant digits so CSV and JSON carry the same values."""
    if isinstance(x, (bool, np.bool_)) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return float(f"{x:.15g}") if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    return _num(obj)


def _cell(x):
    x = _num(x)
    if isinstance(x, float):
        return f"{x:.15g}"
    return "" if x is None else str(x).lower() if isinstance(x, bool) else str(x)


def _render(metadata: dict, columns: list[str], rows: list, fmt: str) -> str:
    if fmt == "json":
        body = {"metadata": _clean(metadata), "columns": columns, "rows": _clean(rows)}
        return json.dumps(body) + "\n"
    buf = io.StringIO()
    for k, v in metadata.items():
        buf.write(f"# {k}={json.dumps(_clean(v))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _render_record(metadata: dict, record: dict, fmt: str) -> str:
    """One flat result object: JSON object or a single-row CSV."""
    if fmt == "json":
        return json.dumps({"metadata": _clean(metadata), **_clean(record)}) + "\n"
    flat = {k: (json.dumps(_clean(v)) if isinstance(v, (dict, list, tuple, np.ndarray)) else v)
            for k, v in record.items()}
    return _render(metadata, list(flat), [list(flat.values())], "csv")


def write_atomic(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- argument helpers ------------------------------------------------------

def _params(args, require_normalized=True) -> OUParams:
    try:
        p = OUParams(args.lam, args.omega, args.sigma2_over_2lambda)
        if require_normalized:
            p.require_normalized()
    except ValueError as exc:
        raise _invalid(str(exc)) from None
    return p


def _times(args) -> Design:
    if (args.times is None) == (args.times_file is None):
        raise _invalid("give exactly one of --times or --times-file")
    try:
        if args.times is not None:
            vals = [float(v) for v in args.times.split(",") if v.strip()]
        else:
            vals = []
            with open(args.times_file, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0].lstrip().startswith("#"):
                        continue
                    try:
                        vals.append(float(row[0]))
                    except ValueError:
                        # only a leading header row may be non-numeric
                        if vals:
                            raise
        return Design(np.array(vals))
    except (ValueError, OSError) as exc:
        raise _invalid(f"bad design: {exc}") from None


def _trend(args) -> TrendSpec:
    try:
        return TrendSpec.preset(args.trend)
    except ValueError as exc:
        raise _invalid(str(exc)) from None


def _grid(lo, hi, steps, name, positive=True) -> np.ndarray:
    if steps is None or steps < 1:
        raise _invalid(f"{name} steps must be >= 1")
    if hi is None:
        raise _invalid(f"{name} maximum is required")
    if lo is None:
        lo = hi / steps
    if positive and lo <= 0:
        raise _invalid(f"{name} grid must be positive")
    if steps > 1 and not hi > lo:
        raise _invalid(f"{name} grid needs max > min")
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([float(hi)])


def _meta(args, command: str, p: OUParams | None = None, **extra) -> dict:
    out = {"command": command, "version": __version__}
    if p is not None:
        out.update({"lambda": p.lam, "omega": p.omega,
                    "sigma2_over_2lambda": p.sigma2_over_2lambda})
    out.update(extra)
    return out


# --- subcommands -----------------------------------------------------------

def cmd_fim(args) -> int:
    p = _params(args)
    dz = _times(args)
    trend = _trend(args)
    fb = fisher_blocks(p, dz, trend)
    record = {"n": dz.n, "q_n": fb.q_n, "i_lambda": fb.i_lambda, "i_omega": fb.i_omega,
              "cross_term": fb.i_lambda_omega, "det": fb.det, "omega_zero": fb.omega_zero}
    code = EXIT_OK
    if args.verify:
        if dz.n > DENSE_MAX_N:
            raise _invalid(f"--verify needs n <= {DENSE_MAX_N}")
        tr = oracle_trend_fim(p, dz, trend)
        cv = oracle_cov_fim(p, dz)

        def rel(a, b):
            return abs(a - b) / max(abs(b), 1e-300)

        deltas = {
            "oracle_delta_q_n": max(rel(tr[0, 0], fb.q_n), rel(tr[1, 1], fb.q_n)),
            "oracle_delta_trend_offdiag": abs(tr[0, 1]) / fb.q_n,
            "oracle_delta_i_lambda": rel(cv[0, 0], fb.i_lambda),
            "oracle_delta_i_omega": abs(cv[1, 1] - fb.i_omega) / max(abs(cv[1, 1]), 1e-300)
            if fb.i_omega else abs(cv[1, 1]),
            "oracle_delta_cross_term": abs(cv[0, 1]),
        }
        record.update(deltas)
        if any(not v < VERIFY_TOL for v in deltas.values()):
            code = EXIT_VERIFY
    write_atomic(_render_record(_meta(args, "fim", p, trend=trend.name), record, args.format),
                 args.output)
    if code == EXIT_VERIFY:
        raise CliError(EXIT_VERIFY, "verification",
                       f"closed form differs from oracle by more than {VERIFY_TOL}")
    return code


def cmd_optimize(args) -> int:
    p = _params(args)
    if args.n < 2:
        raise _invalid("n must be >= 2")
    crit = args.criterion
    if crit == "lambda":
        ne = reject_lambda_design(p, args.n)
        write_atomic(_render_record(_meta(args, "optimize", p, n=args.n), ne.as_dict(),
                                    args.format), args.output)
        raise CliError(EXIT_NONEXISTENT, "nonexistent",
                       "no D-optimal design exists for the damping parameter: "
                       f"information approaches its supremum {ne.supremum:.15g} only as "
                       "spacings collapse to zero")
    try:
        if crit == "trend":
            res = optimal_trend_spacing(p, args.n)
        elif crit == "omega":
            res = optimal_omega_spacing(p, args.n)
        elif crit == "cov-joint":
            res = optimal_cov_joint_spacing(p, args.n)
        else:
            res = optimize_all_params(p, args.n, args.mode, seed=args.seed)
    except FrequencyZero as exc:
        raise _invalid(str(exc)) from None
    record = res.as_dict()
    write_atomic(_render_record(_meta(args, "optimize", p, n=args.n, mode=args.mode,
                                      seed=args.seed), record, args.format), args.output)
    return EXIT_OK


SURFACE_KINDS = ("trend-3pt", "all-2pt", "all-3pt", "dstar", "dstar-all",
                 "efficiency-lambda", "efficiency-omega")


def cmd_surface(args) -> int:
    kind = args.kind
    meta_extra = {"kind": kind}
    if kind in ("trend-3pt", "all-2pt", "all-3pt"):
        p = _params(args)
        d = _grid(args.d_min, args.d_max, args.d_steps, "d")
        if kind == "all-2pt":
            columns = ["d", "objective"]
            rows = [[x, all_params_objective(p, [x])] for x in d]
        else:
            if d.size**2 > MAX_GRID_CELLS:
                raise _invalid(f"grid exceeds {MAX_GRID_CELLS} cells")
            d1, d2 = np.meshgrid(d, d, indexing="ij")
            pair = np.stack([d1.ravel(), d2.ravel()], axis=-1)
            if kind == "trend-3pt":
                vals = (1.0 + np.sum(g_func(p, pair), axis=-1)) ** 2
            else:
                vals = np.array([all_params_objective(p, row) for row in pair])
            columns = ["d1", "d2", "objective"]
            rows = [[a, b, v] for (a, b), v in zip(pair, vals)]
        meta = _meta(args, "surface", p, **meta_extra)
    elif kind in ("dstar", "dstar-all"):
        p = _params(args)
        om = _grid(args.param_min, args.param_max, args.param_steps, "omega")
        if args.n < 2:
            raise _invalid("n must be >= 2")
        rows = []
        for w in om:
            q = OUParams(p.lam, w)
            if kind == "dstar":
                d_star = optimal_trend_spacing(q).spacing
                rows.append([w, d_star, float(r_func(q, d_star))])
            else:
                rows.append([w, args.n, optimize_all_params(q, args.n).spacing])
        columns = ["omega", "d_star", "r_residual"] if kind == "dstar" else ["omega", "n", "d_star"]
        meta = _meta(args, "surface", p, n=args.n, **meta_extra)
        meta.pop("omega")
    else:
        axis = "lambda" if kind == "efficiency-lambda" else "omega"
        d = _grid(args.d_min, args.d_max, args.d_steps, "d")
        v = _grid(args.param_min, args.param_max, args.param_steps, axis,
                  positive=(axis == "lambda"))
        if d.size * v.size > MAX_GRID_CELLS:
            raise _invalid(f"grid exceeds {MAX_GRID_CELLS} cells")
        if args.n < 2:
            raise _invalid("n must be >= 2")
        grid = efficiency_surface(axis, d, v, args.n)
        columns = ["d", axis, "R"]
        rows = [list(r) for r in grid.rows()]
        meta = _meta(args, "surface", None, n=args.n, **grid.fixed, **meta_extra)
    write_atomic(_render(meta, columns, rows, args.format), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = _params(args, require_normalized=False)
    dz = _times(args)
    trend = _trend(args)
    if args.reps < 1 or args.reps > MAX_REPS:
        raise _invalid(f"reps must be in [1, {MAX_REPS}]")
    try:
        tp = TrendParams(args.m1, args.m2)
    except ValueError as exc:
        raise _invalid(str(exc)) from None
    meta = _meta(args, "simulate", p, trend=trend.name, m1=tp.m1, m2=tp.m2,
                 seed=args.seed, reps=args.reps)
    if args.validate:
        summary = validate_gls(p, dz, trend, tp, args.reps, args.seed)
        write_atomic(_render_record(meta, summary.as_dict(), args.format), args.output)
        return EXIT_OK
    if args.reps * dz.n > MAX_PATH_VALUES:
        raise _invalid(f"reps * n must not exceed {MAX_PATH_VALUES} for path output")
    paths = sample_paths(p, dz, trend, tp, args.reps, args.seed)
    rows = [[t, z1, z2, r] for r in range(paths.reps)
            for t, (z1, z2) in zip(paths.times, paths.z[r])]
    write_atomic(_render(meta, ["t", "z1", "z2", "rep"], rows, args.format), args.output)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coudesign",
                     description="D-optimal designs for the complex Ornstein-Uhlenbeck process")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, omega_default=1.0):
        sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        sp.add_argument("--omega", type=float, default=omega_default)
        sp.add_argument("--sigma2-over-2lambda", type=float, default=1.0)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--output", "-o", default=None, help="file path (default stdout)")

    def design(sp):
        sp.add_argument("--times", help="comma-separated observation times")
        sp.add_argument("--times-file", help="CSV with times in the first column")
        sp.add_argument("--trend", default="constant", help="constant or chandler")

    sp = sub.add_parser("fim", help="Fisher information of a design")
    common(sp)
    design(sp)
    sp.add_argument("--verify", action="store_true", help="compare with the dense oracle")
    sp.set_defaults(func=cmd_fim)

    sp = sub.add_parser("optimize", help="optimal spacing for a criterion")
    common(sp)
    sp.add_argument("--criterion", required=True,
                    choices=("trend", "lambda", "omega", "cov-joint", "all"))
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--mode", choices=("equidistant", "free"), default="equidistant")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("surface", help="objective, d* and efficiency grids")
    common(sp)
    sp.add_argument("--kind", required=True, choices=SURFACE_KINDS)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--d-min", type=float)
    sp.add_argument("--d-max", type=float, default=6.0)
    sp.add_argument("--d-steps", type=int, default=120)
    sp.add_argument("--param-min", type=float)
    sp.add_argument("--param-max", type=float, default=2.0)
    sp.add_argument("--param-steps", type=int, default=40)
    sp.set_defaults(func=cmd_surface)

    sp = sub.add_parser("simulate", help="exact sample paths or Monte-Carlo GLS check")
    common(sp)
    design(sp)
    sp.add_argument("--m1", type=float, default=0.0)
    sp.add_argument("--m2", type=float, default=0.0)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--validate", action="store_true",
                    help="emit GLS covariance against the inverse information instead of paths")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": exc.kind, "exit_code": exc.code,
                                     "message": str(exc)}) + "\n")
        return exc.code
    except NonConvergence as exc:
        sys.stderr.write(json.dumps({"error": "nonconvergence", "exit_code": 1,
                                     "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
