"""Command-line interface: mesh generation, single solves with optional
exterior evaluation, and convergence studies with CSV output."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness, mesh as meshmod, solver
from .harness import RunConfig, load_config


def _parse_points(values):
    pts = []
    for v in values:
        x, y = v.split(",")
        pts.append((float(x), float(y)))
    return pts


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.example is not None:
        cfg.example = args.example
    if getattr(args, "kappa", None) is not None:
        cfg.kappa = args.kappa
    if getattr(args, "degree", None) is not None:
        cfg.degree = args.degree
    if getattr(args, "levels", None) is not None:
        lo, hi = args.levels.split("..")
        cfg.level_min, cfg.level_max = int(lo), int(hi)
    if getattr(args, "level", None) is not None:
        cfg.level_min = cfg.level_max = args.level
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "quad_n_out", None) is not None:
        cfg.quad_n_out = args.quad_n_out
    if getattr(args, "quad_n_in", None) is not None:
        cfg.quad_n_in = args.quad_n_in
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cvembem",
        description="Exterior Helmholtz solver coupling curved virtual "
        "elements with a one-equation boundary element condition.",
    )
    ap.add_argument("--config", help="key=value configuration file")
    sub = ap.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate and write a mesh file")
    p_mesh.add_argument("--example", choices=["annulus", "square"], required=True)
    p_mesh.add_argument("--level", type=int, default=0)
    p_mesh.add_argument("--out", default=None)

    p_solve = sub.add_parser("solve", help="solve one configuration")
    p_solve.add_argument("--example", default=None)
    p_solve.add_argument("--kappa", type=float, default=None)
    p_solve.add_argument("--degree", type=int, default=None)
    p_solve.add_argument("--level", type=int, default=None)
    p_solve.add_argument("--quad-n-out", dest="quad_n_out", type=int)
    p_solve.add_argument("--quad-n-in", dest="quad_n_in", type=int)
    p_solve.add_argument("--eval", nargs="*", default=[],
                         help="exterior evaluation points as x,y")

    p_conv = sub.add_parser("converge", help="run a convergence study")
    p_conv.add_argument("--example", default=None)
    p_conv.add_argument("--kappa", type=float, default=None)
    p_conv.add_argument("--degree", type=int, default=None)
    p_conv.add_argument("--levels", default=None, help="range as A..B")
    p_conv.add_argument("--out", default=None)
    p_conv.add_argument("--quad-n-out", dest="quad_n_out", type=int)
    p_conv.add_argument("--quad-n-in", dest="quad_n_in", type=int)

    args = ap.parse_args(argv)
    cfg = load_config(args.config) if args.config else RunConfig()

    if args.command == "mesh":
        m = harness.base_mesh(args.example)
        for _ in range(args.level):
            m = meshmod.refine(m)
        out = args.out or f"{args.example}_level{args.level}.mesh"
        meshmod.write_mesh(m, out)
        print(f"wrote {out}: {m.n_vertices} vertices, {m.n_elements} elements, "
              f"h = {m.h:.6g}")
        return 0

    if args.command == "solve":
        cfg = _apply_overrides(cfg, args)
        cfg.level_max = cfg.level_min
        cfg.validate()
        u_ex, gu_ex = harness.point_source(cfg.kappa)
        m = harness.base_mesh(cfg.example)
        for _ in range(cfg.level_min):
            m = meshmod.refine(m)
        dm = meshmod.build_dof_map(m, cfg.degree)
        res = solver.solve_helmholtz(
            m, solver.ProblemSpec(kappa=cfg.kappa, g=u_ex, k=cfg.degree)
        )
        el2, eh1 = harness.error_norms(m, dm, cfg.degree, res.u, u_ex, gu_ex)
        print(f"level {cfg.level_min}: h={m.h:.6g} dofs={dm.n_unknown} "
              f"(+{res.n_gamma} fluxes)")
        print(f"relative errors: L2 {el2:.6e}  H1-seminorm {eh1:.6e}")
        print(f"linear-solve residual: {res.residual_norm:.3e}")
        pts = _parse_points(args.eval)
        if pts:
            vals = solver.evaluate_exterior(
                res.u[res.boundary.gamma_dofs], res.lam, res.boundary,
                cfg.kappa, np.asarray(pts))
            for (x, y), v, e in zip(pts, vals, u_ex(np.asarray(pts))):
                print(f"u({x:g},{y:g}) = {v:.8f}   |err| = {abs(v - e):.3e}")
        return 0

    if args.command == "converge":
        cfg = _apply_overrides(cfg, args)
        cfg.validate()
        reports = harness.run_convergence(cfg, verbose=True)
        print(f"{'level':>5} {'h':>10} {'dofs':>9} {'err_l2':>12} {'eoc':>6} "
              f"{'err_h1':>12} {'eoc':>6}")
        for r in reports:
            e2 = f"{r.eoc_l2:.2f}" if r.eoc_l2 is not None else "  -  "
            e1 = f"{r.eoc_h1:.2f}" if r.eoc_h1 is not None else "  -  "
            print(f"{r.level:>5} {r.h:>10.4g} {r.dofs:>9} {r.err_l2:>12.4e} "
                  f"{e2:>6} {r.err_h1:>12.4e} {e1:>6}")
        if cfg.out:
            print(f"wrote {cfg.out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
