"""Command-line front end: run refinements, studies, and mesh exports.

Outputs are deterministic: identical invocations produce byte-identical
mesh, CSV and SVG files.  Files are written atomically (temp + rename).
Exit codes: 0 success, 2 usage error, 3 runaway refinement (node cap),
1 any other failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import analysis, approx, engine
from .engine import GreedyConfig, MeshFormatError, RunawayRefinementError, StopRule
from .fields import QuadraticField, get_field
from .geometry import QuadForm, sigma_batch

TRACE_SCHEMA = "trace CSV: step,n_leaves,global_error,max_diam,sigma_mean,sigma_max"
CONV_SCHEMA = "convergence CSV: n,error,product,target,ratio"
SIGMA_SCHEMA = ("sigma CSV: level,count,mean_sigma,max_sigma,"
                "fraction_above,mean_sigma_pow_r0")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".anisomesh-")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_p(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid Lp exponent {text!r}")
    if not p >= 1.0:
        raise argparse.ArgumentTypeError(f"p must satisfy 1 <= p <= inf, got {p}")
    return p


def _parse_checkpoints(text: str) -> list[int]:
    try:
        values = [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid checkpoint list {text!r}")
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("checkpoints must be strictly increasing")
    return values


def _parse_form(text: str) -> QuadForm:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("form must be 'a20,a11,a02'")
    try:
        return QuadForm(*(float(s) for s in parts))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_field(label: str):
    try:
        return get_field(label)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_run_flags(sp, with_decision=True):
    sp.add_argument("--field", type=_parse_field, required=True,
                    help="catalog field label")
    sp.add_argument("--p", type=_parse_p, default=2.0,
                    help="Lp exponent (accepts 'inf'; default 2)")
    sp.add_argument("--operator", choices=approx.OPERATORS,
                    default="interpolation")
    if with_decision:
        sp.add_argument("--decision", choices=engine.DECISIONS, default="l1-interp")
    sp.add_argument("--initial", choices=engine.INITIAL_MESHES,
                    default="ref-triangle")
    sp.add_argument("--node-cap", type=int, default=2 ** 22)
    sp.add_argument("--seed", type=int, default=0,
                    help="reserved for sampling subcommands; run outputs "
                         "are deterministic")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisomesh",
        description="Greedy bisection meshes adapted to a scalar field.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="greedy refinement to a stop rule",
                         epilog=TRACE_SCHEMA)
    _add_run_flags(run)
    stop = run.add_mutually_exclusive_group(required=True)
    stop.add_argument("--target-n", type=int, help="stop at this leaf count")
    stop.add_argument("--eta", type=float, help="stop when all leaf errors <= eta")
    stop.add_argument("--levels", type=int,
                      help="refine every leaf to this generation")
    run.add_argument("--mesh-out", required=True, help="mesh text output path")
    run.add_argument("--trace-out", required=True, help="trace CSV output path")

    conv = sub.add_parser("converge", help="N*error study against the "
                          "hessian tau-norm", epilog=CONV_SCHEMA)
    _add_run_flags(conv)
    conv.add_argument("--checkpoints", type=_parse_checkpoints,
                      default=[64, 256, 1024])
    conv.add_argument("--csv-out", required=True)

    sig = sub.add_parser("sigma-study", help="sigma_q washout under uniform "
                         "refinement (quadratic fields)", epilog=SIGMA_SCHEMA)
    sig.add_argument("--field", type=_parse_field, required=True)
    sig.add_argument("--levels", type=int, default=5,
                     help="3-bisection levels (leaf count x8 per level)")
    sig.add_argument("--threshold", type=float, default=analysis.SIGMA_THRESHOLD)
    sig.add_argument("--initial", choices=engine.INITIAL_MESHES,
                     default="ref-triangle")
    sig.add_argument("--csv-out", required=True)
    sig.add_argument("--seed", type=int, default=0)

    ren = sub.add_parser("render", help="render a mesh file to SVG")
    ren.add_argument("mesh", help="mesh text file")
    ren.add_argument("--svg-out", required=True)
    ren.add_argument("--color-by", choices=("none", "sigma", "error"),
                     default="none")
    ren.add_argument("--form", type=_parse_form,
                     help="a20,a11,a02 quadratic form for sigma coloring")
    ren.add_argument("--field", type=_parse_field,
                     help="catalog field for error coloring "
                     "(or sigma coloring when quadratic)")
    ren.add_argument("--p", type=_parse_p, default=2.0)
    ren.add_argument("--operator", choices=approx.OPERATORS,
                     default="interpolation")
    ren.add_argument("--seed", type=int, default=0)
    return parser


def _config(args, stop: StopRule) -> GreedyConfig:
    return GreedyConfig(p=args.p, operator=args.operator,
                        decision=getattr(args, "decision", "l1-interp"),
                        stop=stop, initial=args.initial,
                        node_cap=args.node_cap)


def cmd_run(args) -> int:
    if args.target_n is not None:
        stop = StopRule("target-count", args.target_n)
    elif args.eta is not None:
        stop = StopRule("error-threshold", args.eta)
    else:
        stop = StopRule("generation-levels", args.levels)
    forest, trace = engine.greedy_run(args.field, _config(args, stop))
    _atomic_write(args.mesh_out, engine.mesh_to_text(forest))
    _atomic_write(args.trace_out, analysis.trace_csv(trace))
    print(f"N={forest.n_leaves} global_error={trace[-1].global_error!r}")
    return 0


def cmd_converge(args) -> int:
    stop = StopRule("target-count", max(args.checkpoints))
    points = analysis.convergence_study(args.field, _config(args, stop),
                                        args.checkpoints)
    _atomic_write(args.csv_out, analysis.convergence_csv(points))
    print(f"final_ratio={points[-1].ratio!r}")
    return 0


def cmd_sigma_study(args) -> int:
    if not isinstance(args.field, QuadraticField):
        print(f"error: sigma-study needs a quadratic field, "
              f"got {args.field.label!r}", file=sys.stderr)
        return 2
    stats = analysis.sigma_study(args.field, roots=args.initial,
                                 levels=args.levels, threshold=args.threshold)
    _atomic_write(args.csv_out, analysis.sigma_csv(stats))
    print(f"final_fraction_above={stats[-1].fraction_above!r}")
    return 0


# three-stop linear color map (blue -> pale yellow -> red)
_CMAP = ((43, 131, 186), (255, 255, 191), (215, 25, 28))


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    if t <= 0.5:
        lo, hi, s = _CMAP[0], _CMAP[1], 2.0 * t
    else:
        lo, hi, s = _CMAP[1], _CMAP[2], 2.0 * t - 1.0
    rgb = [round(a + (b - a) * s) for a, b in zip(lo, hi)]
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def mesh_to_svg(forest, values=None, legend: str | None = None) -> str:
    """SVG 1.1 document with one polygon per leaf.

    The mesh bounding box maps to a 1000x1000 box with the y axis flipped
    to standard math orientation; ``values`` (one per leaf, in leaf-id
    order) drive the fill color, and ``legend`` labels the color bar.
    """
    verts = forest.leaf_vertex_array()
    vmin = verts.reshape(-1, 2).min(axis=0)
    vmax = verts.reshape(-1, 2).max(axis=0)
    span = float(max(vmax[0] - vmin[0], vmax[1] - vmin[1], 1e-300))
    scale = 1000.0 / span
    xy = np.empty_like(verts)
    xy[..., 0] = (verts[..., 0] - vmin[0]) * scale
    xy[..., 1] = 1000.0 - (verts[..., 1] - vmin[1]) * scale

    height = 1080 if values is not None else 1000
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="0 0 1000 {height}" width="1000" height="{height}">',
    ]
    if values is not None:
        values = np.asarray(values, dtype=float)
        if len(values) != len(verts):
            raise ValueError("need one color value per leaf")
        lo, hi = float(values.min()), float(values.max())
        spread = hi - lo
        norm = (values - lo) / spread if spread > 0 else np.full(len(values), 0.5)
    for i in range(len(verts)):
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in xy[i])
        fill = _color(float(norm[i])) if values is not None else "none"
        lines.append(f'<polygon points="{pts}" fill="{fill}" '
                     f'stroke="#000000" stroke-width="0.5"/>')
    if values is not None:
        for k in range(64):
            lines.append(f'<rect x="{200 + 9.375 * k:.3f}" y="1020" '
                         f'width="9.375" height="30" fill="{_color(k / 63)}"/>')
        label = legend or "value"
        lines.append(f'<text x="195" y="1044" font-size="20" '
                     f'text-anchor="end">{lo:.6g}</text>')
        lines.append(f'<text x="805" y="1044" font-size="20">{hi:.6g}</text>')
        lines.append(f'<text x="500" y="1072" font-size="20" '
                     f'text-anchor="middle">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_render(args) -> int:
    forest = engine.load_mesh(args.mesh)
    values = None
    legend = None
    if args.color_by == "sigma":
        form = args.form
        if form is None and args.field is not None:
            form = getattr(args.field, "form", None)
        if form is None:
            print("error: sigma coloring needs --form or a quadratic --field",
                  file=sys.stderr)
            return 2
        values = sigma_batch(form, forest.leaf_vertex_array())
        legend = "sigma_q"
    elif args.color_by == "error":
        if args.field is None:
            print("error: error coloring needs --field", file=sys.stderr)
            return 2
        values = [approx.local_error(t, args.field, args.p, args.operator)
                  for t in forest.leaf_triangles()]
        legend = f"local L{args.p:g} error"
    _atomic_write(args.svg_out, mesh_to_svg(forest, values, legend))
    print(f"wrote {args.svg_out} ({forest.n_leaves} polygons)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": cmd_run,
        "converge": cmd_converge,
        "sigma-study": cmd_sigma_study,
        "render": cmd_render,
    }[args.command]
    try:
        return handler(args)
    except RunawayRefinementError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, MeshFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
