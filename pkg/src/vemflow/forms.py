"""Assembly of the discrete bilinear forms and load vectors.

Every form follows the same pattern: a consistency part integrating projected
polynomials with the coefficient evaluated at quadrature points, plus (where
required) a stabilization acting on the projector kernel.  Two stabilization
recipes are supported:

* ``dofi-dofi``: the identity in DOF coordinates, scaled by the cell area for
  the mass-like forms, times a cellwise coefficient constant;
* ``d-recipe``: a diagonal whose entries are the diagonal of the consistency
  matrix, guarded from below by sigma times the same cellwise constant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, InvalidCoefficientError
from .fields import as_field
from .physics import diffusion_tensor_at

VARIANTS = ("dofi-dofi", "d-recipe")


@dataclass(frozen=True)
class StabilizationRecipe:
    """Which stabilization to use; sigma is the d-recipe positivity safeguard."""

    variant: str = "dofi-dofi"
    sigma: float = 1e-3

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown stabilization variant {self.variant!r}")
        if self.variant == "d-recipe" and not self.sigma > 0:
            raise ConfigError("the d-recipe safeguard sigma must be positive")


def stabilization_matrix(op, space, recipe, nu, cons_diag=None):
    """Diagonal stabilization core S for one cell, in DOF coordinates.

    space selects the scaling: "mass" and "darcy" carry the |E| factor,
    "diffusion" is unscaled.  The assembled stabilization term is
    (I - Pi)^T S (I - Pi), additionally multiplied by nu for dofi-dofi
    (the d-recipe absorbs nu into its diagonal guard).
    """
    if space not in ("mass", "diffusion", "darcy"):
        raise ConfigError(f"unknown stabilization space {space!r}")
    scale = op.area if space in ("mass", "darcy") else 1.0
    n = op.n_z if space in ("mass", "diffusion") else op.n_v
    if recipe.variant == "dofi-dofi":
        return scale * np.eye(n)
    if cons_diag is None:
        raise ConfigError("the d-recipe needs the consistency diagonal")
    d = np.maximum(np.asarray(cons_diag) / scale, recipe.sigma * nu)
    return scale * np.diag(d)


def _stab_term(op, space, recipe, nu, cons, proj_dof):
    s = stabilization_matrix(op, space, recipe, nu, np.diag(cons))
    slc = np.eye(proj_dof.shape[0]) - proj_dof
    term = slc.T @ s @ slc
    if recipe.variant == "dofi-dofi":
        term = nu * term
    return term


def _weighted_gram(op, weights):
    """Sum_q w_q m_a(q) m_b(q) over the degree-(k+1) basis, weights included."""
    v = op.v1q
    return (v * weights[:, None]).T @ v


def _scatter(vals, rows, cols, local, ridx, cidx):
    vals.append(local.ravel())
    rows.append(np.repeat(ridx, len(cidx)))
    cols.append(np.tile(cidx, len(ridx)))


def _to_csr(vals, rows, cols, shape):
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    ).tocsr()


def _projected_velocity(op, u_loc):
    """Values of the projected velocity polynomial at quadrature points."""
    n0 = len(op.exps0)
    coef = op.piv_star @ u_loc
    v0 = op.v1q[:, :n0]
    return np.column_stack((v0 @ coef[:n0], v0 @ coef[n0:]))


def assemble_mass_concentration(mesh, ops, phi, recipe):
    """Porosity-weighted mass matrix on the concentration space."""
    phi = as_field(phi)
    nz = ops.dofmap.n_z
    vals, rows, cols = [], [], []
    for c, op in enumerate(ops.cells):
        phi_q = phi(c, op.quad_x)
        if np.any(phi_q <= 0):
            raise InvalidCoefficientError(f"porosity not positive on cell {c}")
        w = op.quad_w * phi_q
        cons = op.pi0_star.T @ _weighted_gram(op, w) @ op.pi0_star
        nu = abs(w.sum() / op.area)
        local = cons + _stab_term(op, "mass", recipe, nu, cons, op.pi0_dof)
        idx = ops.z_indices(c)
        _scatter(vals, rows, cols, local, idx, idx)
    return _to_csr(vals, rows, cols, (nz, nz))


def assemble_diffusion(mesh, ops, u, phi, d_m, d_l, d_t, recipe):
    """Dispersion-diffusion matrix, tensor evaluated at the projected velocity."""
    phi = as_field(phi)
    if d_m < 0 or d_t < 0 or d_l < 0:
        raise InvalidCoefficientError("dispersion coefficients must be non-negative")
    if d_m == 0.0:
        warnings.warn(
            "molecular diffusion d_m = 0: parabolic coercivity degenerates",
            RuntimeWarning,
            stacklevel=2,
        )
    nz = ops.dofmap.n_z
    vals, rows, cols = [], [], []
    for c, op in enumerate(ops.cells):
        n0 = len(op.exps0)
        uq = _projected_velocity(op, u[ops.v_indices(c)])
        phi_q = phi(c, op.quad_x)
        dq = diffusion_tensor_at(uq, phi_q, d_m, d_l, d_t)
        gx = op.pgrad_star[:n0]
        gy = op.pgrad_star[n0:]
        v0 = op.v1q[:, :n0]
        hxx = (v0 * (op.quad_w * dq[:, 0, 0])[:, None]).T @ v0
        hxy = (v0 * (op.quad_w * dq[:, 0, 1])[:, None]).T @ v0
        hyy = (v0 * (op.quad_w * dq[:, 1, 1])[:, None]).T @ v0
        cons = gx.T @ hxx @ gx + gx.T @ hxy @ gy + gy.T @ hxy @ gx + gy.T @ hyy @ gy
        nu_m = abs((op.quad_w * phi_q).sum() / op.area)
        u_mean = op.quad_w @ uq / op.area
        nu = nu_m * (d_m + d_t * float(np.hypot(*u_mean)))
        local = cons + _stab_term(op, "diffusion", recipe, nu, cons, op.pin_dof)
        idx = ops.z_indices(c)
        _scatter(vals, rows, cols, local, idx, idx)
    return _to_csr(vals, rows, cols, (nz, nz))


def assemble_convection(mesh, ops, u, q_plus, q_minus):
    """Skew-symmetrized convection-reaction form (no stabilization needed).

    The reaction weight is q_plus + q_minus; the transport part is the
    half-difference of the direct and integrated-by-parts convective terms,
    so the quadratic form reduces to the reaction term alone.
    """
    q_plus = as_field(q_plus)
    q_minus = as_field(q_minus)
    nz = ops.dofmap.n_z
    vals, rows, cols = [], [], []
    for c, op in enumerate(ops.cells):
        n0 = len(op.exps0)
        qp = q_plus(c, op.quad_x)
        qm = q_minus(c, op.quad_x)
        if np.any(qp < 0) or np.any(qm < 0):
            raise InvalidCoefficientError(f"negative source sample on cell {c}")
        uq = _projected_velocity(op, u[ops.v_indices(c)])
        gx = op.pgrad_star[:n0]
        gy = op.pgrad_star[n0:]
        v0 = op.v1q[:, :n0]
        # t1[i, j] = int (Pi u . Pi grad phi_j) Pi phi_i
        m_ux = (op.v1q * (op.quad_w * uq[:, 0])[:, None]).T @ v0
        m_uy = (op.v1q * (op.quad_w * uq[:, 1])[:, None]).T @ v0
        t1 = op.pi0_star.T @ (m_ux @ gx + m_uy @ gy)
        t2 = op.pi0_star.T @ _weighted_gram(op, op.quad_w * (qp + qm)) @ op.pi0_star
        local = 0.5 * (t1 + t2 - t1.T)
        idx = ops.z_indices(c)
        _scatter(vals, rows, cols, local, idx, idx)
    return _to_csr(vals, rows, cols, (nz, nz))


def assemble_darcy_mass(mesh, ops, c_dofs, mobility, recipe, bounds=None):
    """Velocity mass matrix weighted by the inverse mobility at the
    projected concentration."""
    nv = ops.dofmap.n_v
    if bounds is None:
        bounds = getattr(mobility, "bounds", None)
    vals, rows, cols = [], [], []
    for c, op in enumerate(ops.cells):
        n0 = len(op.exps0)
        c_poly = op.pi0_star @ c_dofs[ops.z_indices(c)]
        cq = op.v1q @ c_poly
        a_q = np.asarray(mobility(cq))
        if bounds is not None:
            lo, hi = bounds
            slack = 1e-9 * (abs(lo) + abs(hi))
            if np.any(a_q < lo - slack) or np.any(a_q > hi + slack):
                raise InvalidCoefficientError(
                    f"mobility outside [{lo}, {hi}] on cell {c}"
                )
        v0 = op.v1q[:, :n0]
        hw = (v0 * (op.quad_w / a_q)[:, None]).T @ v0
        px = op.piv_star[:n0]
        py = op.piv_star[n0:]
        cons = px.T @ hw @ px + py.T @ hw @ py
        c_mean = float(op.quad_w @ cq) / op.area
        nu = abs(1.0 / float(np.asarray(mobility(np.array([c_mean])))[0]))
        local = cons + _stab_term(op, "darcy", recipe, nu, cons, op.piv_dof)
        idx = ops.v_indices(c)
        _scatter(vals, rows, cols, local, idx, idx)
    return _to_csr(vals, rows, cols, (nv, nv))


def assemble_divergence(mesh, ops):
    """B[(cell, alpha), vdof] = -int (div v) m_alpha, exact from the DOFs."""
    nq, nv = ops.dofmap.n_q, ops.dofmap.n_v
    vals, rows, cols = [], [], []
    for c, op in enumerate(ops.cells):
        local = -(op.h0 @ op.div_star)
        _scatter(vals, rows, cols, local, ops.q_indices(c), ops.v_indices(c))
    return _to_csr(vals, rows, cols, (nq, nv))


def rhs_concentration(mesh, ops, q_plus, c_hat):
    """Load vector (q_plus c_hat, Pi z) on the concentration space."""
    q_plus = as_field(q_plus)
    c_hat = as_field(c_hat)
    out = np.zeros(ops.dofmap.n_z)
    for c, op in enumerate(ops.cells):
        data = q_plus(c, op.quad_x) * c_hat(c, op.quad_x)
        out[ops.z_indices(c)] += op.pi0_star.T @ (op.v1q.T @ (op.quad_w * data))
    return out


def rhs_gravity(mesh, ops, gamma, c_dofs):
    """Load vector (gamma(Pi c), Pi v) on the velocity space."""
    out = np.zeros(ops.dofmap.n_v)
    if gamma is None:
        return out
    for c, op in enumerate(ops.cells):
        n0 = len(op.exps0)
        cq = op.v1q @ (op.pi0_star @ c_dofs[ops.z_indices(c)])
        g = np.asarray(gamma(cq, op.quad_x))
        v0 = op.v1q[:, :n0]
        mom = np.concatenate(
            (v0.T @ (op.quad_w * g[:, 0]), v0.T @ (op.quad_w * g[:, 1]))
        )
        out[ops.v_indices(c)] += op.piv_star.T @ mom
    return out


def rhs_mass(mesh, ops, g_field):
    """Load vector (G, m_alpha) on the pressure test basis."""
    g_field = as_field(g_field)
    out = np.zeros(ops.dofmap.n_q)
    for c, op in enumerate(ops.cells):
        n0 = len(op.exps0)
        gq = g_field(c, op.quad_x)
        out[ops.q_indices(c)] += op.v1q[:, :n0].T @ (op.quad_w * gq)
    return out


def dump_matrix(matrix, path):
    """Debug dump in coordinate text format: row col value."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as f:
        f.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{r} {c} {v:.17g}\n")
