"""Error measurement, convergence studies, and field export.

Relative L2 errors compare the exact solution against the computable
projections of the discrete one: the degree-(k+1) L2 projection for the
concentration, the degree-k vector projection for the velocity, and the
piecewise pressure polynomial itself.  Denominators are the exact-solution
norms; a zero denominator flips the corresponding entry to an absolute error
and flags it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import forms, mesh as meshmod, solver, vem


@dataclass
class ErrorReport:
    c_error: float
    u_error: float
    p_error: float
    h: float
    tau: float
    n_z: int
    n_v: int
    n_q: int
    absolute: dict = field(default_factory=dict)

    def as_row(self):
        return {
            "h": self.h,
            "tau": self.tau,
            "n_z": self.n_z,
            "n_v": self.n_v,
            "n_q": self.n_q,
            "c_error": self.c_error,
            "u_error": self.u_error,
            "p_error": self.p_error,
        }


@dataclass
class ConvergenceReport:
    reports: list
    rates: dict  # variable -> list of per-refinement rates

    def last_rates(self):
        return {k: v[-1] for k, v in self.rates.items()}


def _cell_error_quadrature(mesh, cell, order):
    return meshmod.quadrature_points(mesh, cell, order)


def compute_relative_errors(state, exact, mesh, ops, tau=float("nan")):
    """Relative L2 errors of the final state against a closed-form solution."""
    t = state.t
    k = ops.k
    num_c = num_u = num_p = 0.0
    den_c = den_u = den_p = 0.0
    for c, op in enumerate(ops.cells):
        pts, w = _cell_error_quadrature(mesh, c, 2 * k + 4)
        n0 = len(op.exps0)
        mono1 = vem._monomial_values(op.exps1, op.centroid, op.diameter, pts)

        c_poly = mono1 @ (op.pi0_star @ state.c[ops.z_indices(c)])
        c_ex = exact.c(pts[:, 0], pts[:, 1], t)
        num_c += (w * (c_ex - c_poly) ** 2).sum()
        den_c += (w * c_ex**2).sum()

        coef = op.piv_star @ state.u[ops.v_indices(c)]
        u_poly = np.column_stack(
            (mono1[:, :n0] @ coef[:n0], mono1[:, :n0] @ coef[n0:])
        )
        u_ex = exact.u(pts[:, 0], pts[:, 1], t)
        num_u += (w * ((u_ex - u_poly) ** 2).sum(axis=1)).sum()
        den_u += (w * (u_ex**2).sum(axis=1)).sum()

        p_coef = np.linalg.solve(op.h0, state.p[ops.q_indices(c)]) * op.area
        p_poly = mono1[:, :n0] @ p_coef
        p_ex = exact.p(pts[:, 0], pts[:, 1], t)
        num_p += (w * (p_ex - p_poly) ** 2).sum()
        den_p += (w * p_ex**2).sum()

    absolute = {}

    def rel(num, den, name):
        num = float(np.sqrt(num))
        den = float(np.sqrt(den))
        if den == 0.0:
            absolute[name] = True
            return num
        return num / den

    report = ErrorReport(
        c_error=rel(num_c, den_c, "c"),
        u_error=rel(num_u, den_u, "u"),
        p_error=rel(num_p, den_p, "p"),
        h=mesh.h,
        tau=tau,
        n_z=ops.dofmap.n_z,
        n_v=ops.dofmap.n_v,
        n_q=ops.dofmap.n_q,
        absolute=absolute,
    )
    return report


def convergence_study(
    family,
    levels,
    tau0,
    problem,
    config,
    base_cartesian=8,
    base_voronoi=64,
    voronoi_seed=0,
    lloyd_iterations=3,
):
    """Run the refinement ladder: h and tau halve together at each level.

    Cartesian meshes double the subdivision count per level; Voronoi meshes
    quadruple the cell count, which halves the mesh size on average.
    """
    family = family.lower()
    if levels < 2:
        raise ValueError("a convergence study needs at least two levels")
    reports = []
    for lvl in range(levels):
        if family == "cartesian":
            n = base_cartesian * 2**lvl
            grid = meshmod.build_cartesian(n, n, problem.bounds)
        elif family == "voronoi":
            n = base_voronoi * 4**lvl
            grid = meshmod.build_voronoi(
                n, problem.bounds, rng_seed=voronoi_seed,
                lloyd_iterations=lloyd_iterations,
            )
        else:
            raise ValueError(f"unknown mesh family {family!r}")
        tau = tau0 / 2**lvl
        cfg = solver.SolverConfig(
            tau=tau,
            final_time=config.final_time,
            degree=config.degree,
            stabilization=config.stabilization,
            sigma=config.sigma,
            fct=config.fct,
            velocity_reuse=config.velocity_reuse,
            tolerance=config.tolerance,
        )
        ops = vem.build_operators(grid, cfg.degree)
        states = solver.run_simulation(grid, problem, cfg, ops=ops)
        rep = compute_relative_errors(states[-1], problem.exact, grid, ops, tau=tau)
        reports.append(rep)

    rates = {"c": [], "u": [], "p": []}
    for prev, nxt in zip(reports, reports[1:]):
        same_h = abs(prev.h - nxt.h) <= 1e-12 * prev.h
        for var, attr in (("c", "c_error"), ("u", "u_error"), ("p", "p_error")):
            e0, e1 = getattr(prev, attr), getattr(nxt, attr)
            if same_h or e1 == 0.0:
                rates[var].append(float("nan"))
            else:
                rates[var].append(float(np.log2(e0 / e1)))
    return ConvergenceReport(reports=reports, rates=rates)


def write_convergence_csv(report, path):
    """One row per refinement level, errors and the rate into that level."""
    fields = [
        "level", "h", "tau", "n_z", "n_v", "n_q",
        "c_error", "u_error", "p_error", "c_rate", "u_rate", "p_rate",
    ]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for lvl, rep in enumerate(report.reports):
            row = {"level": lvl}
            for key, val in rep.as_row().items():
                row[key] = _fmt(val) if isinstance(val, float) else val
            for var in ("c", "u", "p"):
                rate = report.rates[var][lvl - 1] if lvl > 0 else float("nan")
                row[f"{var}_rate"] = _fmt(rate)
            writer.writerow(row)


def _fmt(x):
    return f"{x:.17g}"


def export_fields(state, mesh, ops, path):
    """Write plot-ready CSVs: per-cell projected fields and vertex values.

    ``<path>_cells.csv`` holds one row per cell (projected concentration,
    velocity and pressure evaluated at the centroid); ``<path>_vertices.csv``
    holds the concentration vertex values used for visualization.
    """
    k = ops.k
    n0 = vem.dim_poly(k)
    cells_path = f"{path}_cells.csv"
    verts_path = f"{path}_vertices.csv"
    with open(cells_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["cell", "x", "y", "concentration", "velocity_x", "velocity_y", "pressure"]
        )
        for c, op in enumerate(ops.cells):
            center = op.centroid[None, :]
            mono1 = vem._monomial_values(op.exps1, op.centroid, op.diameter, center)
            c_val = float(mono1 @ (op.pi0_star @ state.c[ops.z_indices(c)]))
            coef = op.piv_star @ state.u[ops.v_indices(c)]
            u_val = (
                float(mono1[:, :n0] @ coef[:n0]),
                float(mono1[:, :n0] @ coef[n0:]),
            )
            p_coef = np.linalg.solve(op.h0, state.p[ops.q_indices(c)]) * op.area
            p_val = float(mono1[:, :n0] @ p_coef)
            writer.writerow(
                [c, _fmt(op.centroid[0]), _fmt(op.centroid[1]), _fmt(c_val),
                 _fmt(u_val[0]), _fmt(u_val[1]), _fmt(p_val)]
            )
    with open(verts_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["vertex", "x", "y", "concentration"])
        for v in range(mesh.num_vertices):
            writer.writerow(
                [v, _fmt(mesh.vertices[v, 0]), _fmt(mesh.vertices[v, 1]),
                 _fmt(float(state.c[v]))]
            )
    return cells_path, verts_path


def read_fields_csv(path):
    """Read back a CSV written by export_fields (floats bit-exact)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, np.array(rows)
