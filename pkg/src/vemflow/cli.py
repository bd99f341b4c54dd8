"""Command-line interface.

Subcommands: ``mesh`` (generate and check meshes), ``converge`` (refinement
study on the manufactured problem), ``run`` (time-step a benchmark problem),
``errors`` (recompute the error report from exported state).  Exit codes:
0 success, 1 validation or usage error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import mesh as meshmod, metrics, physics, solver, vem
from .exceptions import SolverFailureError, VemflowError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="vemflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate and check polygonal meshes")
    p_mesh.add_argument("--kind", choices=("cartesian", "voronoi"), default="cartesian")
    p_mesh.add_argument("--n", type=int, default=8,
                        help="subdivisions per side (cartesian) or cell count (voronoi)")
    p_mesh.add_argument("--seed", type=int, default=0)
    p_mesh.add_argument("--lloyd", type=int, default=3)
    p_mesh.add_argument("--bounds", type=float, nargs=4, default=(0.0, 0.0, 1.0, 1.0),
                        metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    p_mesh.add_argument("--rho0", type=float, default=0.05)
    p_mesh.add_argument("--rho1", type=float, default=0.05)
    p_mesh.add_argument("--out", help="write the mesh in polymesh format")

    p_conv = sub.add_parser("converge", help="manufactured-solution refinement study")
    p_conv.add_argument("--family", choices=("cartesian", "voronoi"), default="cartesian")
    p_conv.add_argument("--levels", type=int, default=4)
    p_conv.add_argument("--tau0", type=float, default=0.002)
    p_conv.add_argument("--stab", choices=("dofi", "drecipe"), default="dofi")
    p_conv.add_argument("--sigma", type=float, default=1e-3)
    p_conv.add_argument("--k", type=int, default=0)
    p_conv.add_argument("--R", type=int, default=1)
    p_conv.add_argument("--seed", type=int, default=0)
    p_conv.add_argument("--config", help="key = value config file (flags override)")
    p_conv.add_argument("--out", help="write the study as CSV")

    p_run = sub.add_parser("run", help="time-step one of the benchmark problems")
    p_run.add_argument("--problem", required=True,
                       choices=("example1", "example2a", "example2b"))
    p_run.add_argument("--tau", type=float)
    p_run.add_argument("--T", type=float)
    p_run.add_argument("--R", type=int, default=1)
    p_run.add_argument("--fct", action="store_true")
    p_run.add_argument("--stab", choices=("dofi", "drecipe"), default="dofi")
    p_run.add_argument("--sigma", type=float, default=1e-3)
    p_run.add_argument("--n", type=int, help="cartesian subdivisions (default 8 / 25)")
    p_run.add_argument("--out-every", type=int, default=0,
                       help="export fields every N steps")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--config", help="key = value config file (flags override)")
    p_run.add_argument("--verbose", action="store_true", help="print progress lines")

    p_err = sub.add_parser("errors", help="recompute errors from exported state")
    p_err.add_argument("--problem", required=True, choices=("example1",))
    p_err.add_argument("--dir", required=True, help="directory written by run")
    p_err.add_argument("--out", help="write the report as CSV")
    return parser


def _stab_name(flag):
    return {"dofi": "dofi-dofi", "drecipe": "d-recipe"}[flag]


def _load_problem(name):
    if name == "example1":
        return physics.example1_problem()
    return physics.example2_problem(name[-1])


def _cmd_mesh(args):
    if args.kind == "cartesian":
        grid = meshmod.build_cartesian(args.n, args.n, tuple(args.bounds))
    else:
        grid = meshmod.build_voronoi(
            args.n, tuple(args.bounds), rng_seed=args.seed,
            lloyd_iterations=args.lloyd,
        )
    quality = meshmod.check_assumptions(grid, args.rho0, args.rho1)
    print(
        f"cells={grid.num_cells} vertices={grid.num_vertices} "
        f"edges={grid.num_edges} h={grid.h:.6g}"
    )
    print(
        f"D1={'ok' if quality.d1_ok else 'FAIL'} "
        f"D2={'ok' if quality.d2_ok else 'FAIL'} "
        f"D3={'ok' if quality.d3_ok else 'FAIL'} "
        f"(rho0={args.rho0}, rho1={args.rho1}, "
        f"d1_ratio={quality.d1_ratio:.4f}, d2_ratio={quality.d2_ratio:.4f})"
    )
    if args.out:
        meshmod.write_mesh(grid, args.out)
        print(f"wrote {args.out}")
    return 0


def _base_config(args):
    if getattr(args, "config", None):
        with open(args.config) as f:
            return solver.config_from_text(f.read())
    return solver.SolverConfig()


def _cmd_converge(args):
    problem = physics.example1_problem()
    base = _base_config(args)
    config = solver.SolverConfig(
        tau=args.tau0,
        final_time=problem.final_time,
        degree=args.k,
        stabilization=_stab_name(args.stab),
        sigma=args.sigma,
        velocity_reuse=args.R,
        tolerance=base.tolerance,
    )
    report = metrics.convergence_study(
        args.family, args.levels, args.tau0, problem, config,
        voronoi_seed=args.seed,
    )
    print("level  h           c_error      u_error      p_error      rates(c,u,p)")
    for lvl, rep in enumerate(report.reports):
        rates = ""
        if lvl > 0:
            rates = " ".join(
                f"{report.rates[v][lvl - 1]:.2f}" for v in ("c", "u", "p")
            )
        print(
            f"{lvl:<6d} {rep.h:<11.5g} {rep.c_error:<12.5g} "
            f"{rep.u_error:<12.5g} {rep.p_error:<12.5g} {rates}"
        )
    if args.out:
        metrics.write_convergence_csv(report, args.out)
        print(f"wrote {args.out}")
    return 0


def _write_state(path, state):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["section", "index", "value"])
        writer.writerow(["n", 0, f"{float(state.n):.17g}"])
        writer.writerow(["t", 0, f"{state.t:.17g}"])
        for name, vec in (("C", state.c), ("U", state.u), ("P", state.p)):
            for i, v in enumerate(vec):
                writer.writerow([name, i, f"{v:.17g}"])


def _read_state(path):
    data = {"C": {}, "U": {}, "P": {}, "n": {}, "t": {}}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for section, idx, value in reader:
            data[section][int(idx)] = float(value)

    def vec(d):
        return np.array([d[i] for i in range(len(d))])

    return solver.State(
        n=int(data["n"][0]), t=data["t"][0],
        c=vec(data["C"]), u=vec(data["U"]), p=vec(data["P"]),
    )


def _cmd_run(args):
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    problem = _load_problem(args.problem)
    n_default = 8 if args.problem == "example1" else 25
    n = args.n or n_default
    grid = meshmod.build_cartesian(n, n, problem.bounds)
    base = _base_config(args)
    config = solver.SolverConfig(
        tau=args.tau if args.tau else problem.tau,
        final_time=args.T if args.T else problem.final_time,
        degree=base.degree,
        stabilization=_stab_name(args.stab),
        sigma=args.sigma,
        fct=args.fct,
        velocity_reuse=args.R,
        tolerance=base.tolerance,
    )
    ops = vem.build_operators(grid, config.degree)
    store_every = args.out_every if args.out_every else None
    states = solver.run_simulation(grid, problem, config, ops=ops,
                                   store_every=store_every)
    final = states[-1]
    print(
        f"completed {final.n} steps to t={final.t:.6g}; "
        f"c range [{final.c.min():.6g}, {final.c.max():.6g}]"
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        meshmod.write_mesh(grid, os.path.join(args.out, "mesh.txt"))
        with open(os.path.join(args.out, "config.txt"), "w") as f:
            f.write(solver.config_to_text(config))
        for state in states if store_every else [final]:
            metrics.export_fields(
                state, grid, ops, os.path.join(args.out, f"fields_{state.n:06d}")
            )
        _write_state(os.path.join(args.out, "state_final.csv"), final)
        print(f"wrote {args.out}")
    return 0


def _cmd_errors(args):
    problem = _load_problem(args.problem)
    grid = meshmod.read_mesh(os.path.join(args.dir, "mesh.txt"))
    state = _read_state(os.path.join(args.dir, "state_final.csv"))
    with open(os.path.join(args.dir, "config.txt")) as f:
        config = solver.config_from_text(f.read())
    ops = vem.build_operators(grid, config.degree)
    report = metrics.compute_relative_errors(
        state, problem.exact, grid, ops, tau=config.tau
    )
    print(
        f"h={report.h:.6g} tau={report.tau:.6g} "
        f"c_error={report.c_error:.6g} u_error={report.u_error:.6g} "
        f"p_error={report.p_error:.6g}"
    )
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(report.as_row()))
            writer.writeheader()
            writer.writerow(
                {k: f"{v:.17g}" if isinstance(v, float) else v
                 for k, v in report.as_row().items()}
            )
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "mesh": _cmd_mesh,
    "converge": _cmd_converge,
    "run": _cmd_run,
    "errors": _cmd_errors,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except SolverFailureError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 2
    except VemflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
