"""Time stepping: Darcy saddle-point solves, transport steps, FCT variant.

One step of the scheme is backward Euler with the nonlinear couplings lagged:
the concentration system is solved with the previous velocity frozen, then
the mixed Darcy system is refreshed with the new concentration (only every
``velocity_reuse`` steps when that saving is requested).  Both systems are
linear and are handed to a sparse direct solve with a residual contract.
"""

from __future__ import annotations

import configparser
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms, vem
from .exceptions import (
    ConfigError,
    ConvergenceFailureError,
    SolverFailureError,
    UnsupportedDegreeError,
)
from .fields import ConstField
from .forms import StabilizationRecipe

log = logging.getLogger("vemflow")


@dataclass
class State:
    """Solution snapshot: step index, time, and the three DOF vectors."""

    n: int
    t: float
    c: np.ndarray
    u: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 0.002
    final_time: float = 0.01
    degree: int = 0
    stabilization: str = "dofi-dofi"
    sigma: float = 1e-3
    fct: bool = False
    velocity_reuse: int = 1
    tolerance: float = 1e-10
    max_iterations: int = 0  # 0 = direct solve only

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        n = self.final_time / self.tau
        if abs(n - round(n)) > 0.5:
            raise ConfigError("final_time / tau must be within 0.5 of an integer")
        if self.velocity_reuse < 1:
            raise ConfigError("velocity_reuse must be at least 1")
        if self.degree not in (0, 1):
            raise UnsupportedDegreeError(f"degree {self.degree} unsupported")

    @property
    def num_steps(self):
        return int(round(self.final_time / self.tau))

    @property
    def recipe(self):
        return StabilizationRecipe(variant=self.stabilization, sigma=self.sigma)


def config_to_text(config):
    """Serialize a SolverConfig as flat key = value text."""
    cp = configparser.ConfigParser()
    cp["solver"] = {
        "tau": repr(config.tau),
        "final_time": repr(config.final_time),
        "degree": str(config.degree),
        "stabilization": config.stabilization,
        "sigma": repr(config.sigma),
        "fct": str(config.fct).lower(),
        "velocity_reuse": str(config.velocity_reuse),
        "tolerance": repr(config.tolerance),
        "max_iterations": str(config.max_iterations),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_from_text(text):
    cp = configparser.ConfigParser()
    cp.read_string(text)
    s = cp["solver"]
    return SolverConfig(
        tau=s.getfloat("tau"),
        final_time=s.getfloat("final_time"),
        degree=s.getint("degree", 0),
        stabilization=s.get("stabilization", "dofi-dofi"),
        sigma=s.getfloat("sigma", 1e-3),
        fct=s.getboolean("fct", False),
        velocity_reuse=s.getint("velocity_reuse", 1),
        tolerance=s.getfloat("tolerance", 1e-10),
        max_iterations=s.getint("max_iterations", 0),
    )


def linear_solve(matrix, rhs, tolerance=1e-10):
    """Direct sparse solve with a relative residual contract."""
    a = sp.csc_matrix(matrix)
    if a.shape[0] != a.shape[1]:
        raise SolverFailureError(f"system is not square: {a.shape}")
    with np.errstate(all="ignore"):
        x = spla.spsolve(a, rhs)
    bnorm = np.linalg.norm(rhs)
    rnorm = np.linalg.norm(a @ x - rhs) if np.all(np.isfinite(x)) else np.inf
    residual = rnorm / bnorm if bnorm > 0 else rnorm
    if not np.isfinite(residual) or residual > tolerance:
        raise ConvergenceFailureError(
            f"linear solve residual {residual:.3e} above {tolerance:.1e}",
            residual=residual,
        )
    return x, residual


@dataclass
class _Workspace:
    """Mesh-level immutable pieces shared by all steps."""

    ops: object
    b_div: sp.csr_matrix
    free_v: np.ndarray
    mean_weights: np.ndarray  # integral of each pressure basis function
    mass: sp.csr_matrix = None

    def pressure_moments(self, coeffs):
        """Convert per-cell polynomial coefficients to moment DOFs."""
        out = np.empty_like(coeffs)
        for c, op in enumerate(self.ops.cells):
            idx = self.ops.q_indices(c)
            out[idx] = (op.h0 @ coeffs[idx]) / op.area
        return out

    def pressure_coefficients(self, moments):
        out = np.empty_like(moments)
        for c, op in enumerate(self.ops.cells):
            idx = self.ops.q_indices(c)
            out[idx] = np.linalg.solve(op.h0, moments[idx]) * op.area
        return out


def make_workspace(mesh, ops, recipe=None, phi=None):
    """Precompute the divergence matrix, free velocity DOFs and gauge vector."""
    dofmap = ops.dofmap
    fixed = dofmap.boundary_v_dofs(mesh)
    free = np.setdiff1d(np.arange(dofmap.n_v), fixed)
    b_div = forms.assemble_divergence(mesh, ops)
    n0 = vem.dim_poly(ops.k)
    mean_weights = np.concatenate([op.mom1[:n0] for op in ops.cells])
    ws = _Workspace(ops=ops, b_div=b_div, free_v=free, mean_weights=mean_weights)
    if phi is not None and recipe is not None:
        ws.mass = forms.assemble_mass_concentration(mesh, ops, phi, recipe)
    return ws


def darcy_solve(mesh, ws, problem, c_dofs, t, recipe, tolerance=1e-10):
    """Mixed Darcy solve with zero-mean pressure via a scalar multiplier.

    Returns (U, P-moments, residual).  The no-flow condition is imposed by
    eliminating boundary-edge velocity DOFs.
    """
    ops = ws.ops
    a_h = forms.assemble_darcy_mass(
        mesh, ops, c_dofs, problem.mobility, recipe
    )
    g_gamma = forms.rhs_gravity(mesh, ops, problem.gamma, c_dofs)
    g_b = forms.rhs_mass(mesh, ops, problem.g_rate(t))

    free = ws.free_v
    a_ff = a_h[free][:, free]
    b_f = ws.b_div[:, free]
    nq = ops.dofmap.n_q
    w = sp.csr_matrix(ws.mean_weights[None, :])
    zero_v = sp.csr_matrix((nq, nq))
    system = sp.bmat(
        [
            [a_ff, b_f.T, None],
            [b_f, zero_v, w.T],
            [None, w, None],
        ],
        format="csc",
    )
    rhs = np.concatenate((g_gamma[free], -g_b, [0.0]))
    sol, residual = linear_solve(system, rhs, tolerance)
    u = np.zeros(ops.dofmap.n_v)
    u[free] = sol[: len(free)]
    p_coeff = sol[len(free) : len(free) + nq]
    return u, ws.pressure_moments(p_coeff), residual


def concentration_step(
    mesh, ws, problem, c_prev, u_prev, tau, t_n, recipe, tolerance=1e-10, diff=None
):
    """One backward Euler transport step with the lagged velocity."""
    theta, diff_new, b = _transport_system_cached(
        mesh, ws, problem, u_prev, t_n, recipe, diff
    )
    system = ws.mass + tau * (theta + diff_new)
    rhs = tau * b + ws.mass @ c_prev
    c_new, residual = linear_solve(system.tocsc(), rhs, tolerance)
    return c_new, residual, diff_new


def _transport_system_cached(mesh, ws, problem, u_prev, t_n, recipe, diff):
    ops = ws.ops
    theta = forms.assemble_convection(
        mesh, ops, u_prev, problem.q_plus(t_n), problem.q_minus(t_n)
    )
    if diff is None:
        diff = forms.assemble_diffusion(
            mesh, ops, u_prev, problem.phi, problem.d_m, problem.d_l,
            problem.d_t, recipe,
        )
    b = forms.rhs_concentration(mesh, ops, problem.source(t_n), ConstField(1.0))
    return theta, diff, b


def _artificial_diffusion(a_mat):
    """Symmetric d_ij = max(a_ij, a_ji, 0) on off-diagonals, zero row sums."""
    a = a_mat.tocsr()
    w = a.maximum(a.T).maximum(0).tolil()
    w.setdiag(0.0)
    w = w.tocsr()
    row_sums = np.asarray(w.sum(axis=1)).ravel()
    return w, row_sums


def fct_concentration_step(
    mesh,
    ws,
    problem,
    c_prev,
    u_prev,
    tau,
    t_n,
    recipe,
    tolerance=1e-10,
    diff=None,
    return_details=False,
):
    """Flux-corrected transport step (linearized, lowest order only).

    Stage 1 solves a bound-preserving low-order system built from the lumped
    mass matrix and an algebraically smeared transport operator; stage 2 adds
    back the limited antidiffusive fluxes (Zalesak limiter with local bounds
    taken from the low-order solution, prelimited to never steepen it).
    """
    if ws.ops.k != 0:
        raise UnsupportedDegreeError("FCT requires the lowest-order space (k = 0)")
    theta, diff_new, b = _transport_system_cached(
        mesh, ws, problem, u_prev, t_n, recipe, diff
    )
    mass = ws.mass
    lumped = np.asarray(mass.sum(axis=1)).ravel()
    if np.any(lumped <= 0):
        raise SolverFailureError("lumped mass is not positive")

    a_mat = (theta + diff_new).tocsr()
    w, w_rows = _artificial_diffusion(a_mat)
    low = a_mat - w + sp.diags(w_rows)

    system = sp.diags(lumped) + tau * low
    rhs = lumped * c_prev + tau * b
    c_low, residual = linear_solve(system.tocsc(), rhs, tolerance)
    rate = (b - low @ c_low) / lumped

    # pairwise antidiffusive fluxes on the union sparsity graph
    graph = ((mass - sp.diags(mass.diagonal())).tocsr() + w).tocoo()
    mask = graph.row != graph.col
    rows, cols = graph.row[mask], graph.col[mask]
    m_ij = np.asarray(mass[rows, cols]).ravel()
    d_ij = np.asarray(w[rows, cols]).ravel()
    flux = m_ij * (rate[rows] - rate[cols]) + d_ij * (c_low[rows] - c_low[cols])
    # prelimiting: drop fluxes that would steepen the low-order solution
    flux[flux * (c_low[cols] - c_low[rows]) > 0] = 0.0

    n = len(c_low)
    pos = np.zeros(n)
    neg = np.zeros(n)
    np.add.at(pos, rows, np.maximum(flux, 0.0))
    np.add.at(neg, rows, np.minimum(flux, 0.0))
    cmax = c_low.copy()
    cmin = c_low.copy()
    np.maximum.at(cmax, rows, c_low[cols])
    np.minimum.at(cmin, rows, c_low[cols])
    q_pos = lumped * (cmax - c_low) / tau
    q_neg = lumped * (cmin - c_low) / tau
    with np.errstate(divide="ignore", invalid="ignore"):
        r_pos = np.where(pos > 0, np.minimum(1.0, q_pos / pos), 1.0)
        r_neg = np.where(neg < 0, np.minimum(1.0, q_neg / neg), 1.0)
    alpha = np.where(
        flux > 0,
        np.minimum(r_pos[rows], r_neg[cols]),
        np.minimum(r_neg[rows], r_pos[cols]),
    )
    corr = np.zeros(n)
    np.add.at(corr, rows, alpha * flux)
    c_new = c_low + tau * corr / lumped
    if return_details:
        details = {
            "c_low": c_low,
            "alpha": alpha,
            "flux": flux,
            "rows": rows,
            "cols": cols,
            "lumped": lumped,
        }
        return c_new, residual, diff_new, details
    return c_new, residual, diff_new


def run_simulation(mesh, problem, config, ops=None, store_every=None, ws=None):
    """Full time loop; returns the stored snapshots (always includes n=0, N).

    The velocity-pressure pair is refreshed every ``velocity_reuse`` steps and
    carried forward in between.
    """
    recipe = config.recipe
    problem = problem.bind(mesh)
    if ops is None:
        ops = vem.build_operators(mesh, config.degree)
    if ws is None:
        ws = make_workspace(mesh, ops, recipe=recipe, phi=problem.phi)
    if ws.mass is None:
        ws.mass = forms.assemble_mass_concentration(mesh, ops, problem.phi, recipe)

    c = vem.interpolate_scalar(ops, problem.c0)
    u, p, res_up = darcy_solve(
        mesh, ws, problem, c, 0.0, recipe, config.tolerance
    )
    states = [State(n=0, t=0.0, c=c.copy(), u=u.copy(), p=p.copy())]

    n_steps = config.num_steps
    diff_cache = None
    step = (
        fct_concentration_step if config.fct else concentration_step
    )
    for n in range(1, n_steps + 1):
        t_n = n * config.tau
        try:
            c, res_c, diff_cache = step(
                mesh, ws, problem, c, u, config.tau, t_n, recipe,
                config.tolerance, diff=diff_cache,
            )
            if n % config.velocity_reuse == 0:
                u, p, res_up = darcy_solve(
                    mesh, ws, problem, c, t_n, recipe, config.tolerance
                )
                diff_cache = None  # velocity changed; diffusion must follow
        except SolverFailureError as err:
            raise SolverFailureError(f"step {n} failed: {err}") from err
        log.info(
            "step=%d t=%.12g residual_c=%.3e residual_up=%.3e", n, t_n, res_c, res_up
        )
        if (store_every and n % store_every == 0) or n == n_steps:
            states.append(State(n=n, t=t_n, c=c.copy(), u=u.copy(), p=p.copy()))
    return states
