"""Command line driver: ``nitsche-hybrid {run,sweep-gamma,compare-rho,upscale,export-mesh}``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines; flags
given on the command line override the file.  Mesh sizes may be written as
decimals or powers of two (``2^-7``), comma separated for sweeps.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import coefficients as coef
from .experiments import (
    ExperimentConfig,
    compare_rho,
    gamma_threshold,
    run_experiment,
    sweep_gamma,
)
from .geometry import build_partition, write_polygon
from .interface import build_interface
from .mesh import build_mesh_pair, write_mesh_text
from .postproc import convergence_rates
from .upscaling import tabulate_effective
from .vtk import write_vtk

log = logging.getLogger("nitsche_hybrid")


def parse_number(text):
    """Float from ``0.25``, ``2^-5`` or ``2**-5``."""
    t = str(text).strip().replace("**", "^")
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    return float(t)


def parse_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(parse_number(v) for v in text)
    return tuple(parse_number(v) for v in str(text).split(",") if v.strip())


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


_FIELDS = {
    "example": int,
    "defect": str,
    "L": parse_number,
    "delta": parse_number,
    "eps": parse_number,
    "R1": parse_number,
    "R2": parse_number,
    "h": parse_list,
    "H": parse_list,
    "r": int,
    "tol": parse_number,
    "max_iter": int,
    "ref_n": int,
    "output": str,
    "rho": str,
    "cache_dir": str,
    "upscale_grid": int,
    "cell_n": int,
}


def _truthy(v):
    return str(v).lower() in ("1", "true", "yes", "on")


def build_config(args) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in list(_FIELDS) + ["gamma", "vtk", "full_scale"]:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
    kw = {}
    for key, v in values.items():
        if key in _FIELDS:
            kw[key] = _FIELDS[key](v)
        elif key == "gamma":
            kw[key] = "auto" if str(v) == "auto" else parse_number(v)
        elif key in ("vtk", "full_scale"):
            kw[key] = _truthy(v)
        elif key in ("gammas",):
            continue
        else:
            raise ValueError(f"unknown config key {key!r}")
    return ExperimentConfig(**kw)


def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--example", type=int, choices=(1, 2))
    p.add_argument("--defect", choices=("well", "channel", "ellipse"))
    p.add_argument("--L", help="well half-width or channel width")
    p.add_argument("--delta", help="buffer width")
    p.add_argument("--eps", help="microscopic length scale")
    p.add_argument("--R1")
    p.add_argument("--R2")
    p.add_argument("--h", help="fine mesh size(s), e.g. 2^-7,2^-8")
    p.add_argument("--H", help="coarse mesh size(s)")
    p.add_argument("--gamma", help="penalty, or 'auto' for the coercivity bound")
    p.add_argument("--r", type=int, choices=(1, 2), help="polynomial degree")
    p.add_argument("--tol", help="solver tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="CG iteration limit")
    p.add_argument("--ref-n", dest="ref_n", type=int, help="reference mesh is n x n")
    p.add_argument("--output", help="output directory")
    p.add_argument("--rho", choices=("c0", "c1"))
    p.add_argument("--cache-dir", dest="cache_dir", help="reference solution cache")
    p.add_argument("--vtk", action="store_true", help="write VTK files of each solution")
    p.add_argument(
        "--full-scale", dest="full_scale", action="store_true",
        help="eps=0.01 and a 3000 x 3000 reference (slow)",
    )


def _print_reports(reports):
    print(f"{'h':>12} {'H':>12} {'gamma':>9} {'e(u_eps)':>11} {'e(u_0)':>11} {'dofs':>8}")
    for r in reports:
        print(f"{r.h:12.6g} {r.H:12.6g} {r.gamma:9.4g} {r.e_ueps:11.4e} {r.e_u0:11.4e} {r.dofs:8d}")
    if len(reports) > 1:
        for name in ("e_ueps", "e_u0"):
            rates = convergence_rates([getattr(r, name) for r in reports])
            print(f"rates {name}: " + " ".join(f"{v:.2f}" for v in rates))


def cmd_run(args):
    cfg = build_config(args)
    reports = run_experiment(cfg)
    _print_reports(reports)
    print(f"wrote {Path(cfg.output) / 'results.csv'}")
    return 0


def cmd_sweep_gamma(args):
    cfg = build_config(args)
    gammas = parse_list(args.gammas)
    reports = sweep_gamma(cfg, gammas)
    _print_reports(reports)
    g_star = gamma_threshold([r.gamma for r in reports], [r.e_ueps for r in reports])
    print(f"observed threshold gamma* = {g_star:g}")
    return 0


def cmd_compare_rho(args):
    cfg = build_config(args)
    out = compare_rho(cfg)
    for kind, reps in out.items():
        print(f"rho = {kind}")
        _print_reports(reps)
    for a, b in zip(out["c0"], out["c1"]):
        rel = abs(a.e_ueps - b.e_ueps) / max(a.e_ueps, b.e_ueps)
        print(f"h={a.h:g} H={a.H:g}: relative difference in e(u_eps) {rel:.3%}")
    return 0


def cmd_upscale(args):
    g = np.linspace(0.0, 1.0, args.grid)
    if args.field == "example1":
        fast = coef.example1_fast(parse_number(args.R1 or 2.5), parse_number(args.R2 or 1.5))
    elif args.field == "example2":
        fast = coef.example2_fast
    else:
        def fast(x, y):
            return 2.0 + np.sin(2 * np.pi * y[:, 0])
    table = tabulate_effective(fast, g, g, n_cell=args.cell_n, name=args.field)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    print(f"bounds (Voigt-Reuss over samples): {table.bounds[0]:.6g} .. {table.bounds[1]:.6g}")
    if args.field == "example1":
        ref = coef.example1_effective(parse_number(args.R1 or 2.5), parse_number(args.R2 or 1.5))
        X, Y = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        print(f"e_hmm against the closed form: {coef.e_hmm(ref, table, pts):.3e}")
    print(f"wrote {out}")
    return 0


def cmd_export_mesh(args):
    cfg = build_config(args)
    part = build_partition(cfg.shape(), cfg.delta, cfg.n_segments)
    h, H = cfg.pairs()[0]
    meshes = build_mesh_pair(part, h, H)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    for name, m in (("fine", meshes.inner), ("coarse", meshes.outer), ("ring", meshes.ring)):
        write_mesh_text(out / f"{name}.mesh", m)
        write_vtk(out / f"{name}.vtk", m.vertices, m.triangles)
    for k, p in enumerate(part.k0):
        write_polygon(out / f"k0_{k}.txt", p)
    for k, p in enumerate(part.k1):
        write_polygon(out / f"k1_{k}.txt", p)
    itf = build_interface(meshes.inner, meshes.outer, part)
    itf.to_csv(out / "interface.csv")
    print(
        f"fine: {meshes.inner.n_triangles} triangles, coarse: {meshes.outer.n_triangles} "
        f"triangles, interface pieces: {len(itf)}, sigma = {meshes.sigma:.3f}"
    )
    print(f"wrote {out}")
    return 0


def make_parser():
    parser = argparse.ArgumentParser(prog="nitsche-hybrid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the (h, H) pairs of one scenario")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-gamma", help="fixed meshes, several penalties")
    _add_common(p)
    p.add_argument("--gammas", default="1,2,5,10,20,50,100,200,500,1000,5000")
    p.set_defaults(func=cmd_sweep_gamma)

    p = sub.add_parser("compare-rho", help="C0 ring versus C1 cosine transition (well)")
    _add_common(p)
    p.set_defaults(func=cmd_compare_rho)

    p = sub.add_parser("upscale", help="tabulate effective matrices from cell problems")
    p.add_argument("--field", choices=("example1", "example2", "layered"), default="example1")
    p.add_argument("--grid", type=int, default=17, help="macro samples per axis")
    p.add_argument("--cell-n", dest="cell_n", type=int, default=64)
    p.add_argument("--R1")
    p.add_argument("--R2")
    p.add_argument("--output", default="effective.csv")
    p.set_defaults(func=cmd_upscale)

    p = sub.add_parser("export-mesh", help="write the meshes, polygons and interface pieces")
    _add_common(p)
    p.set_defaults(func=cmd_export_mesh)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
