"""Command-line front end: frames, continuity, project, corridor and plan.

Every subcommand validates its inputs, computes all results in memory and
only then writes its files (atomically, via a temporary file and rename), so
an error never leaves partial output behind.  Tables are written as CSV with
17 significant digits or as JSON (``--format``).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .corridor import (
    EllipseCorridor,
    PlanarCorridor,
    ellipse_at,
    generate,
    generate_planar,
    load_corridor,
    obstacle_residuals,
    project_cloud,
    section_areas,
    volume,
)
from .curve import NAMED_CURVES, ParametricCurve, load_curve, named_curve, read_points_csv
from .errors import DataError, NumericalError, PathParamError
from .frames import RATE_NAMES, FrameField, continuity_study, count_flips, fsf_field, ptfd, ptfi
from .spatial import project
from . import planner

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
FORMATS = ("csv", "json")
CONTINUITY_TOL = 1e-6
PLAN_TOL = 1e-5


class UsageError(Exception):
    """Invalid combination of command-line options."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ output


def fmt(x) -> str:
    """Float formatting used in every CSV file (17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def table_text(header, rows, kind: str) -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if kind == "json":
        data = [[None if math.isnan(v) else float(v) for v in row] for row in rows]
        return json.dumps({"columns": list(header), "rows": data}, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class Outputs:
    """Files produced by one subcommand, written together at the end."""

    def __init__(self, out_dir: str, kind: str):
        self.out_dir, self.kind = out_dir, kind
        self.files: dict = {}

    def table(self, stem: str, header, rows):
        self.files[f"{stem}.{self.kind}"] = table_text(header, rows, self.kind)

    def document(self, name: str, doc):
        self.files[name] = json_text(doc)

    def paths(self):
        return [os.path.join(self.out_dir, name) for name in self.files]

    def write(self):
        os.makedirs(self.out_dir, exist_ok=True)
        for name, text in self.files.items():
            target = os.path.join(self.out_dir, name)
            fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return self.paths()


# ------------------------------------------------------------------ inputs


def resolve_curve(spec: str) -> ParametricCurve:
    """A built-in curve name or a curve JSON file."""
    if spec in NAMED_CURVES:
        return named_curve(spec)
    if os.path.isfile(spec):
        return load_curve(spec)
    raise DataError(f"{spec!r} is neither a built-in curve ({', '.join(NAMED_CURVES)}) nor a curve file")


def grid_for(curve: ParametricCurve, nodes: Optional[int], default: int) -> np.ndarray:
    n = default if nodes is None else nodes
    return np.linspace(curve.domain[0], curve.domain[1], n)


def check_distinct(inputs, outputs: Outputs):
    ins = {os.path.realpath(p) for p in inputs if p and os.path.exists(p)}
    clash = ins & {os.path.realpath(p) for p in outputs.paths()}
    if clash:
        raise UsageError(f"output would overwrite an input file: {', '.join(sorted(clash))}")


def _positive_int(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("must be an integer >= 2")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


# ------------------------------------------------------------------ frames


def _max_norm(arr) -> Optional[float]:
    norms = np.linalg.norm(arr, axis=1)
    norms = norms[np.isfinite(norms)]
    return float(norms.max()) if len(norms) else None


def cmd_frames(args, out: Outputs):
    curve = resolve_curve(args.curve)
    grid = grid_for(curve, args.grid, 1001)
    fsf = fsf_field(curve, grid, strict=False)
    ptf = ptfi(curve, grid)
    ptf = ptfd(ptf, strict=False)  # one-sided derivatives at the knots of low-class curves
    fsf_singular = fsf.singular if fsf.singular is not None else np.zeros(len(grid), dtype=bool)
    fsf_flips = count_flips(fsf)
    summary = {
        "curve": args.curve,
        "nodes": len(grid),
        "fsf": {
            "max_omega": _max_norm(fsf.omega_world),
            "singular": bool(fsf_singular.any() or fsf_flips > 0),
            "singular_theta": [float(t) for t in grid[fsf_singular]],
            "normal_flips": int(fsf_flips),
        },
        "ptf": {
            "max_omega": _max_norm(ptf.omega_world),
            "singular": False,
            "max_drift": float(np.max(ptf.drift)) if ptf.drift is not None else 0.0,
        },
    }
    out.table("frames_fsf", FrameField.CSV_HEADER, fsf.to_rows())
    out.table("frames_ptf", FrameField.CSV_HEADER, ptf.to_rows())
    out.document("frames_summary.json", summary)
    return summary, [args.curve if os.path.exists(args.curve) else None]


def report_frames(summary):
    for kind in ("fsf", "ptf"):
        s = summary[kind]
        w = "undefined" if s["max_omega"] is None else f"{s['max_omega']:.6g}"
        print(f"{kind.upper()}: max |omega| = {w}, singular = {s['singular']}")


# -------------------------------------------------------------- continuity


def cmd_continuity(args, out: Outputs):
    curve = resolve_curve(args.curve)
    tol = CONTINUITY_TOL if args.tol is None else args.tol
    study = continuity_study(curve, args.continuity, split=args.split, tol=tol)
    grid = grid_for(study.curve, args.grid, 1001)
    header = ["theta"] + [f"{n}{k}" for n in RATE_NAMES for k in (1, 2, 3)]
    out.table(f"continuity_c{args.continuity}_traces", header, study.traces(grid))
    verdict = study.continuous
    summary = {
        "curve": args.curve,
        "continuity": args.continuity,
        "split": study.split,
        "tol": study.tol,
        "jumps": {n: float(j) for n, j in zip(RATE_NAMES, study.jumps)},
        "scales": {n: float(s) for n, s in zip(RATE_NAMES, study.scales)},
        "verdict": {n: "continuous" if ok else "discontinuous" for n, ok in verdict.items()},
    }
    out.document(f"continuity_c{args.continuity}.json", summary)
    return summary, [args.curve]


def report_continuity(summary):
    print(f"C^{summary['continuity']} joint at theta = {summary['split']:g}")
    for name in RATE_NAMES:
        print(f"  {name:<6} jump = {summary['jumps'][name]:.3e}  {summary['verdict'][name]}")


# ----------------------------------------------------------------- project


def cmd_project(args, out: Outputs):
    curve = resolve_curve(args.curve)
    points = read_points_csv(args.traj)
    if len(points) == 0:
        raise DataError(f"{args.traj}: no points")
    frames = ptfi(curve, grid_for(curve, args.grid, 2001))
    rows = []
    for k, p in enumerate(points):
        s = project(curve, frames, p)
        rows.append([k, s.xi, s.eta[0], s.eta[1], s.tangential_residual, float(s.clamped)])
    rows = np.array(rows)
    out.table("projection", ["index", "xi", "eta1", "eta2", "tangential_residual", "clamped"], rows)
    summary = {
        "curve": args.curve,
        "points": len(rows),
        "max_abs_eta": float(np.abs(rows[:, 2:4]).max()),
        "max_abs_residual": float(np.abs(rows[:, 4]).max()),
        "clamped": int(rows[:, 5].sum()),
    }
    out.document("projection_summary.json", summary)
    return summary, [args.traj, args.curve]


def report_project(summary):
    print(f"projected {summary['points']} points; max |eta| = {summary['max_abs_eta']:.3e}, "
          f"max tangential residual = {summary['max_abs_residual']:.3e}")


# ---------------------------------------------------------------- corridor


def _planar_rows(c: PlanarCorridor, xs):
    lo, hi = c.bounds(xs)
    return np.column_stack([xs, lo, hi])


def _ellipse_rows(c: EllipseCorridor, xs):
    rows = []
    for x in xs:
        s = ellipse_at(c, float(x))
        rows.append([x, s.E[0, 0], s.E[0, 1], s.E[1, 1], s.d[0], s.d[1], s.center[0], s.center[1],
                     s.axes[0], s.axes[1], s.level])
    return np.array(rows)


ELLIPSE_HEADER = ["xi", "E11", "E12", "E22", "d1", "d2", "center1", "center2", "axis1", "axis2", "level"]


def cmd_corridor(args, out: Outputs):
    curve = resolve_curve(args.curve)
    cloud = read_points_csv(args.cloud)
    frames = ptfi(curve, grid_for(curve, args.grid, 2001))
    proj = project_cloud(curve, frames, cloud, max_radius=args.wrapper)
    xs = np.linspace(curve.domain[0], curve.domain[1], args.sections)
    summary = {
        "curve": args.curve,
        "degree": args.degree,
        "obstacles": len(proj.obstacles),
        "dropped_at_ends": proj.dropped_ends,
        "dropped_far": proj.dropped_far,
    }
    planar = curve.dimension == 2 and not args.ellipse
    if planar:
        obstacles = [(o.xi, o.x_perp[0]) for o in proj.obstacles]
        c = generate_planar(curve, None, obstacles, args.degree, n_samples=args.samples,
                            wrapper_halfwidth=args.wrapper)
        lo, hi = c.bounds(np.array([o[0] for o in obstacles])) if obstacles else (np.zeros(0), np.zeros(0))
        eta = np.array([o[1] for o in obstacles])
        margin = np.where(eta > 0, eta - hi, lo - eta) if obstacles else np.zeros(0)
        out.table("corridor_sections", ["xi", "lower", "upper"], _planar_rows(c, xs))
        summary.update(kind="planar", min_obstacle_margin=float(margin.min()) if len(margin) else None,
                       area=float(trapezoid((c.bounds(xs)[1] - c.bounds(xs)[0]) * curve.speed(xs), xs)))
    else:
        c = generate(curve, frames, proj.obstacles, args.degree, n_samples=args.samples,
                     wrapper_radius=args.wrapper)
        res = obstacle_residuals(c, proj.obstacles)
        out.table("corridor_sections", ELLIPSE_HEADER, _ellipse_rows(c, xs))
        summary.update(kind="ellipse", min_obstacle_residual=float(res.min()) if len(res) else None,
                       volume=volume(c, curve), max_section_area=float(section_areas(c, xs).max()))
    out.document("corridor.json", c.to_dict())
    out.document("corridor_summary.json", summary)
    return summary, [args.cloud, args.curve]


def report_corridor(summary):
    size = summary.get("volume", summary.get("area"))
    print(f"{summary['kind']} corridor of degree {summary['degree']} from {summary['obstacles']} obstacles; "
          f"{'volume' if 'volume' in summary else 'area'} = {size:.6g}")


# -------------------------------------------------------------------- plan


def cmd_plan(args, out: Outputs):
    curve = resolve_curve(args.ref)
    if curve.dimension != 2:
        raise DataError("the manipulator planner needs a planar reference")
    if args.corridor == "scenario":
        if args.ref != "sin":
            raise UsageError("the built-in corridor scenario belongs to the 'sin' reference")
        _, corridor = planner_scenario()
        bounds = planner.CorridorBounds.from_corridor(corridor)
    elif args.corridor == "none":
        bounds = None
    else:
        corridor = load_corridor(args.corridor)
        if not isinstance(corridor, PlanarCorridor):
            raise DataError("the planner needs a planar corridor (lateral bounds)")
        bounds = planner.CorridorBounds.from_corridor(corridor)
    model = planner.ManipulatorModel()
    problem = planner.transcribe(model, curve, bounds, N=args.N)
    tol = PLAN_TOL if args.tol is None else args.tol
    options = planner.AlOptions(rho0=args.rho0, tol_violation=tol, max_outer=args.max_outer)
    traj = planner.solve(problem, options=options)
    violation = planner.revalidate(problem, traj)
    out.table("trajectory", planner.Trajectory.CSV_HEADER, traj.to_rows(model))
    r = traj.report
    summary = {
        "reference": args.ref,
        "corridor": args.corridor,
        "N": args.N,
        "total_time": traj.total_time,
        "converged": r.converged,
        "message": r.message,
        "outer_iterations": r.outer_iterations,
        "inner_iterations": r.inner_iterations,
        "solver_violation": r.max_violation,
        "projected_gradient": r.projected_gradient,
        "revalidated_violation": violation,
        "saturation_fraction": planner.saturation_fraction(traj, model),
    }
    out.document("plan_summary.json", summary)
    return summary, [args.ref, args.corridor]


def planner_scenario():
    from .scenes import manipulator_corridor

    return manipulator_corridor()


def report_plan(summary):
    state = "converged" if summary["converged"] else f"NOT converged ({summary['message']})"
    print(f"T = {summary['total_time']:.9g} s, {state}")
    print(f"max violation (revalidated) = {summary['revalidated_violation']:.3e}")


# ------------------------------------------------------------------ parser

COMMANDS = {
    "frames": (cmd_frames, report_frames),
    "continuity": (cmd_continuity, report_continuity),
    "project": (cmd_project, report_project),
    "corridor": (cmd_corridor, report_corridor),
    "plan": (cmd_plan, report_plan),
}


def _global_flags(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--out-dir", default=d("."), help="directory for output files (default: .)")
    p.add_argument("--format", choices=FORMATS, default=d("csv"), help="table format (default: csv)")
    p.add_argument("--grid", type=_positive_int, default=d(None),
                   help="number of grid nodes along the curve (subcommand-specific default)")
    p.add_argument("--tol", type=_positive_float, default=d(None),
                   help="tolerance: continuity jump threshold (relative, default 1e-6) or "
                        "planner constraint violation (default 1e-5)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False), help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathparam", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("frames", parents=[common], help="Frenet-Serret and parallel transport frames")
    p.add_argument("--curve", required=True, help=f"built-in ({', '.join(NAMED_CURVES)}) or curve JSON")

    p = sub.add_parser("continuity", parents=[common], help="rate continuity across a re-interpolated joint")
    p.add_argument("--curve", default="continuity", help="curve to split (default: continuity)")
    p.add_argument("-c", "--continuity", type=int, required=True, choices=range(0, 5), help="class 0..4")
    p.add_argument("--split", type=float, default=0.5, help="joint parameter (default: 0.5)")

    p = sub.add_parser("project", parents=[common], help="project points onto a curve")
    p.add_argument("--curve", required=True, help="reference curve (built-in name or JSON)")
    p.add_argument("--traj", required=True, help="CSV of points (x, y[, z]) with a header row")

    p = sub.add_parser("corridor", parents=[common], help="collision-free corridor around a path")
    p.add_argument("--curve", default="line", help="reference curve (default: line)")
    p.add_argument("--cloud", required=True, help="CSV of obstacle points")
    p.add_argument("--degree", type=int, default=5, help="polynomial degree (default: 5)")
    p.add_argument("--wrapper", type=_positive_float, default=1.0, help="wrapper radius / half-width")
    p.add_argument("--samples", type=int, default=None, help="constraint samples along the path")
    p.add_argument("--sections", type=_positive_int, default=101, help="rows of the section table")
    p.add_argument("--ellipse", action="store_true", help="ellipse corridor even for planar curves")

    p = sub.add_parser("plan", parents=[common], help="time-optimal manipulator motion in a corridor")
    p.add_argument("--ref", default="sin", help="reference curve (default: sin)")
    p.add_argument("--corridor", default="scenario",
                   help="planar corridor JSON, 'scenario' (built-in narrowing corridor) or 'none'")
    p.add_argument("-N", type=int, default=50, help="number of intervals (default: 50)")
    p.add_argument("--rho0", type=_positive_float, default=planner.DEFAULT_RHO0, help="initial penalty")
    p.add_argument("--max-outer", type=int, default=200, help="outer iteration limit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run, report = COMMANDS[args.command]
    out = Outputs(args.out_dir, args.format)
    try:
        if args.command == "corridor" and args.degree < 0:
            raise UsageError("--degree must be non-negative")
        if args.command == "plan" and args.N < 10:
            raise UsageError("-N must be at least 10")
        summary, inputs = run(args, out)
        check_distinct(inputs, out)
        out.write()
    except UsageError as exc:
        print(f"pathparam {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        print(f"pathparam {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, PathParamError) as exc:
        print(f"pathparam {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    report(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
