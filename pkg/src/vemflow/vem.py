"""Local virtual element machinery.

Three discrete spaces live on each polygon E (degree parameter k):

* concentration: enhanced nodal space of degree k+1, DOFs = vertex values,
  k Gauss-Lobatto values per edge, and moments against P_{k-1};
* velocity: H(div)-conforming space, DOFs = k+1 normal moments per edge,
  divergence moments against P_k modulo constants, rotor moments against
  P_{k-1};
* pressure: discontinuous P_k, DOFs = cell moments.

Everything is expressed in the scaled monomial basis
m_(a,b)(x) = ((x - x_E)/h_E)^a ((y - y_E)/h_E)^b, ordered by total degree.
The element operators collect the computable projector matrices used by the
discrete forms: the H1-seminorm projector onto P_{k+1}, the L2 projector onto
P_{k+1} (through the enhancement constraint), the vector L2 projector onto
[P_k]^2, the L2 projector of gradients, and the exact divergence map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import mesh as meshmod
from .exceptions import IllShapedCellError, UnsupportedDegreeError

COND_WARN = 1e12


def dim_poly(k):
    """Dimension of P_k in two variables (0 for negative k)."""
    return 0 if k < 0 else (k + 1) * (k + 2) // 2


def monomial_exponents(k):
    """Exponent pairs of the scaled monomial basis, graded ordering."""
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


def local_dof_counts(n_vertices, k):
    """(nZ, nV, nQ) for a polygon with the given vertex count."""
    if k < 0:
        raise UnsupportedDegreeError("degree must be non-negative")
    nv = int(n_vertices)
    n_z = nv + k * nv + dim_poly(k - 1)
    n_v = (k + 1) * nv + (dim_poly(k) - 1) + dim_poly(k - 1)
    return n_z, n_v, dim_poly(k)


def _check_degree(k):
    if k not in (0, 1):
        raise UnsupportedDegreeError(
            f"degree k={k} is not supported (k=0 required, k=1 optional)"
        )


def _monomial_values(exps, centroid, h, pts):
    """(npts, nexps) table of scaled monomial values."""
    sx = (pts[:, 0] - centroid[0]) / h
    sy = (pts[:, 1] - centroid[1]) / h
    return np.column_stack([sx**a * sy**b for a, b in exps])


def _solve_local(a, b, what, cell):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_WARN:
        raise IllShapedCellError(
            f"cell {cell}: {what} system condition {cond:.2e} exceeds {COND_WARN:.0e}"
        )
    return np.linalg.solve(a, b)


@dataclass
class DofMap:
    """Global numbering for the three spaces.

    Concentration: vertex block, then one block of k values per edge, then
    cell moments.  Velocity: k+1 moments per edge (edge-major), then the cell
    divergence/rotor moments.  Pressure: dim P_k moments per cell.
    """

    k: int
    num_vertices: int
    num_edges: int
    num_cells: int

    @property
    def n_z(self):
        return (
            self.num_vertices
            + self.k * self.num_edges
            + dim_poly(self.k - 1) * self.num_cells
        )

    @property
    def n_v(self):
        per_cell = (dim_poly(self.k) - 1) + dim_poly(self.k - 1)
        return (self.k + 1) * self.num_edges + per_cell * self.num_cells

    @property
    def n_q(self):
        return dim_poly(self.k) * self.num_cells

    def z_indices(self, mesh, cell):
        loop = mesh.cells[cell]
        idx = list(loop)
        if self.k >= 1:
            for e in mesh.cell_edges[cell]:
                idx.append(self.num_vertices + e)
        base = self.num_vertices + self.k * self.num_edges
        nm = dim_poly(self.k - 1)
        idx.extend(base + cell * nm + j for j in range(nm))
        return np.asarray(idx, dtype=int)

    def v_indices(self, mesh, cell):
        idx = []
        for e in mesh.cell_edges[cell]:
            idx.extend(e * (self.k + 1) + j for j in range(self.k + 1))
        per_cell = (dim_poly(self.k) - 1) + dim_poly(self.k - 1)
        base = (self.k + 1) * self.num_edges
        idx.extend(base + cell * per_cell + j for j in range(per_cell))
        return np.asarray(idx, dtype=int)

    def q_indices(self, cell):
        nq = dim_poly(self.k)
        return np.arange(cell * nq, (cell + 1) * nq)

    def boundary_v_dofs(self, mesh):
        """Velocity DOFs sitting on boundary edges (the no-flow constraint)."""
        eids = np.nonzero(mesh.boundary_edge)[0]
        return (
            eids[:, None] * (self.k + 1) + np.arange(self.k + 1)[None, :]
        ).ravel()


@dataclass
class ElementOperators:
    """Per-cell projector and embedding matrices in the scaled monomial basis.

    Coefficient layout: scalar polynomials of degree k+1 use the graded basis
    (n1 entries); vector polynomials of degree k stack the x-component
    coefficients before the y-component ones (2 n0 entries).
    """

    cell: int
    k: int
    area: float
    centroid: np.ndarray
    diameter: float
    n_vertices: int
    exps1: list
    exps0: list
    h1: np.ndarray          # Gram matrix of the degree-(k+1) basis
    h0: np.ndarray          # Gram matrix of the degree-k basis
    mom1: np.ndarray        # integrals of the degree-(k+1) basis
    quad_x: np.ndarray
    quad_w: np.ndarray
    v1q: np.ndarray         # monomial values at quadrature points
    dz: np.ndarray          # DOFs of the scalar monomials, (nZ, n1)
    pin_star: np.ndarray    # H1 projector, DOFs -> coefficients
    pin_dof: np.ndarray     # H1 projector in DOF coordinates
    pi0_star: np.ndarray    # L2 projector (enhanced space)
    pi0_dof: np.ndarray
    pgrad_star: np.ndarray  # L2 projection of gradients, (2 n0, nZ)
    dv: np.ndarray          # DOFs of the vector monomials, (nV, 2 n0)
    piv_star: np.ndarray    # vector L2 projector, (2 n0, nV)
    piv_dof: np.ndarray
    div_star: np.ndarray    # exact divergence map, (n0, nV)

    @property
    def n_z(self):
        return self.dz.shape[0]

    @property
    def n_v(self):
        return self.dv.shape[0]


def _edge_frames(mesh, cell):
    """Per loop edge: (loop index, sign, length, global normal, endpoints).

    The sign is +1 when the cell traverses the edge in its global direction;
    the outward normal is sign times the global normal.
    """
    frames = []
    for i in range(len(mesh.cells[cell])):
        eid = mesh.cell_edges[cell][i]
        sign = int(mesh.cell_edge_signs[cell][i])
        a, b = mesh.edges[eid]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        d = pb - pa
        length = float(np.hypot(*d))
        normal = np.array([d[1], -d[0]]) / length
        frames.append((i, eid, sign, pa, pb, length, normal))
    return frames


def _edge_gauss01(npts):
    x, w = leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _lagrange_values(nodes, x):
    """Values of the Lagrange basis on `nodes` at points `x`."""
    vals = np.ones((len(nodes), len(x)))
    for i, xi in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if i != j:
                vals[i] *= (x - xj) / (xi - xj)
    return vals


def build_cell_operators(mesh, cell, k):
    """Assemble all local projectors for one cell."""
    _check_degree(k)
    loop = mesh.cells[cell]
    nv = len(loop)
    pts = mesh.vertices[loop]
    area = float(mesh.areas[cell])
    centroid = mesh.centroids[cell]
    h = float(mesh.diameters[cell])

    k1 = k + 1
    exps1 = monomial_exponents(k1)
    exps0 = monomial_exponents(k)
    n1, n0 = len(exps1), len(exps0)
    nkm1 = dim_poly(k - 1)

    table = meshmod.scaled_monomial_integrals(pts, centroid, h, 2 * k1)
    h1 = np.array([[table[a + c, b + d] for (c, d) in exps1] for (a, b) in exps1])
    h0 = h1[:n0, :n0]
    mom1 = h1[0].copy()

    quad_x, quad_w = meshmod.quadrature_points(mesh, cell, 2 * k + 2)
    v1q = _monomial_values(exps1, centroid, h, quad_x)

    frames = _edge_frames(mesh, cell)
    perimeter = sum(f[5] for f in frames)

    n_z, n_v, _ = local_dof_counts(nv, k)

    # positions of the scalar DOF groups in the local ordering
    z_vertex = {int(loop[i]): i for i in range(nv)}
    z_edge_off = nv            # k internal nodes per edge, edge-major
    z_mom_off = nv + k * nv    # nkm1 cell moments

    # ---- scalar monomial embedding -------------------------------------
    dz = np.zeros((n_z, n1))
    dz[:nv] = _monomial_values(exps1, centroid, h, pts)
    if k >= 1:
        mids = np.array([0.5 * (f[3] + f[4]) for f in frames])
        dz[z_edge_off : z_edge_off + nv] = _monomial_values(exps1, centroid, h, mids)
    if nkm1:
        dz[z_mom_off : z_mom_off + nkm1] = h1[:nkm1, :] / area

    # ---- boundary bookkeeping ------------------------------------------
    xg, wg = _edge_gauss01(k + 3)
    # Lagrange nodes along each global edge: endpoint a, endpoint b, internals
    lag_nodes = np.array([0.0, 1.0] + ([0.5] if k == 1 else []))
    lag = _lagrange_values(lag_nodes, xg)

    edge_data = []
    for i, eid, sign, pa, pb, length, normal in frames:
        gauss_pts = pa[None, :] * (1 - xg)[:, None] + pb[None, :] * xg[:, None]
        a, b = mesh.edges[eid]
        zdofs = [z_vertex[int(a)], z_vertex[int(b)]]
        if k == 1:
            zdofs.append(z_edge_off + i)
        edge_data.append(
            (i, sign, length, normal, gauss_pts, np.asarray(zdofs), wg * length)
        )

    # ---- H1 projector ---------------------------------------------------
    g = np.zeros((n1, n1))
    for ia, (a, b) in enumerate(exps1):
        for ib, (c, d) in enumerate(exps1):
            val = 0.0
            if a and c:
                val += a * c * table[a + c - 2, b + d]
            if b and d:
                val += b * d * table[a + c, b + d - 2]
            g[ia, ib] = val / h**2
    bmat = np.zeros((n1, n_z))
    g[0] = 0.0
    for _, sign, length, normal, gpts, zdofs, gw in edge_data:
        mono = _monomial_values(exps1, centroid, h, gpts)
        # boundary mean row fixes the constants
        g[0] += mono.T @ gw / perimeter
        bmat[0, zdofs] += lag @ gw / perimeter
        n_out = sign * normal
        for ia, (a, b) in enumerate(exps1):
            if ia == 0:
                continue
            gx = a / h * mono[:, exps1.index((a - 1, b))] if a else 0.0
            gy = b / h * mono[:, exps1.index((a, b - 1))] if b else 0.0
            dn = gx * n_out[0] + gy * n_out[1]
            bmat[ia, zdofs] += lag @ (gw * dn)
    # volume term: - int phi_j Laplace(m_alpha); hits the moment DOFs only
    for ia, (a, b) in enumerate(exps1):
        if ia == 0:
            continue
        for (aa, bb), coef in (((a - 2, b), a * (a - 1)), ((a, b - 2), b * (b - 1))):
            if coef and aa >= 0 and bb >= 0:
                j = exps1.index((aa, bb))
                bmat[ia, z_mom_off + j] -= coef / h**2 * area
    pin_star = _solve_local(g, bmat, "H1 projector", cell)
    pin_dof = dz @ pin_star

    # ---- L2 projector on the enhanced space ------------------------------
    # moments against P_{k-1} are DOFs; moments against the orthogonal
    # complement of P_{k-1} in P_{k+1} agree with those of the H1 projection
    if k == 0:
        pi0_star = pin_star.copy()
    else:
        c = np.zeros((n1, n_z))
        c[:nkm1, z_mom_off : z_mom_off + nkm1] = area * np.eye(nkm1)
        p = h1 @ pin_star
        hk = h1[:nkm1, :nkm1]
        for ia in range(nkm1, n1):
            s = np.linalg.solve(hk, h1[:nkm1, ia])
            c[ia] = p[ia] - s @ p[:nkm1] + s @ c[:nkm1]
        pi0_star = _solve_local(h1, c, "L2 projector", cell)
    pi0_dof = dz @ pi0_star

    # ---- L2 projection of gradients --------------------------------------
    # (proj grad z, p) = -int z div p + bdry int z p.n for vector monomials p
    rhs = np.zeros((2 * n0, n_z))
    for comp in range(2):
        for ig, (a, b) in enumerate(exps0):
            row = comp * n0 + ig
            da = a if comp == 0 else b
            if da:
                shifted = (a - 1, b) if comp == 0 else (a, b - 1)
                j = exps1.index(shifted)
                rhs[row, z_mom_off + j] -= da / h * area
            for _, sign, length, normal, gpts, zdofs, gw in edge_data:
                mono = _monomial_values([(a, b)], centroid, h, gpts)[:, 0]
                n_out = sign * normal
                rhs[row, zdofs] += lag @ (gw * mono * n_out[comp])
    pgrad_star = np.vstack(
        (
            _solve_local(h0, rhs[:n0], "gradient projector", cell),
            _solve_local(h0, rhs[n0:], "gradient projector", cell),
        )
    )

    # ---- velocity space ---------------------------------------------------
    # local DOF layout: edge-major normal moments, then divergence moments
    # (monomials of degree 1..k), then rotor moments (degree <= k-1)
    ndiv = n0 - 1
    div_off = nv * k1
    rot_off = div_off + ndiv

    # centered edge monomials mu_m(xi) = (xi - 1/2)^m and the maps between
    # normal-trace coefficients and the edge moment DOFs
    mu = np.array([(xg - 0.5) ** m for m in range(k1)])
    mu_mass01 = (mu * wg[None, :]) @ mu.T  # unit-length edge mass matrix
    coef_of_dof = np.linalg.inv(mu_mass01)  # length factors cancel

    # divergence map: the constant moment is the net boundary flux, the
    # higher moments are divergence DOFs by definition
    tmom = np.zeros((n0, n_v))
    for i, sign, length, normal, gpts, zdofs, gw in edge_data:
        for m in range(k1):
            trace = coef_of_dof[:, m] @ mu  # normal trace of the unit DOF
            tmom[0, i * k1 + m] += sign * (gw * trace).sum()
    for j in range(ndiv):
        tmom[1 + j, div_off + j] += np.sqrt(area)
    div_star = _solve_local(h0, tmom, "divergence map", cell)

    # vector monomial embedding
    dv = np.zeros((n_v, 2 * n0))
    for comp in range(2):
        for ig, (a, b) in enumerate(exps0):
            col = comp * n0 + ig
            for i, sign, length, normal, gpts, zdofs, gw in edge_data:
                mono = _monomial_values([(a, b)], centroid, h, gpts)[:, 0]
                vn = mono * normal[comp]
                for m in range(k1):
                    dv[i * k1 + m, col] = (wg * vn * mu[m]).sum()
            da = a if comp == 0 else b
            if da:
                shifted = (a - 1, b) if comp == 0 else (a, b - 1)
                j1 = exps1.index(shifted)
                for j in range(ndiv):
                    dv[div_off + j, col] += da / h * h1[j1, 1 + j] / np.sqrt(area)
            # x-perp = h (m_(0,1), -m_(1,0)) in scaled coordinates
            perp = (a, b + 1) if comp == 0 else (a + 1, b)
            perp_sign = h if comp == 0 else -h
            j1 = exps1.index(perp)
            for j in range(nkm1):
                dv[rot_off + j, col] += perp_sign * h1[j1, j] / area

    # moments against the decomposition basis {grad m_alpha} + {x-perp m_beta}
    w = np.zeros((2 * n0, n_v))
    dc = np.zeros((2 * n0, 2 * n0))
    col = 0
    hmix = h1[:n0, :]
    for ia, (a, b) in enumerate(exps1):
        if ia == 0:
            continue
        # (v, grad m) = -int (div v) m + int_bdry (v.n) m
        w[col] = -(hmix[:, ia] @ div_star)
        for i, sign, length, normal, gpts, zdofs, gw in edge_data:
            mono = _monomial_values([(a, b)], centroid, h, gpts)[:, 0]
            for m in range(k1):
                trace = coef_of_dof[:, m] @ mu
                w[col, i * k1 + m] += sign * (gw * mono * trace).sum()
        if a:
            dc[exps1.index((a - 1, b)), col] = a / h
        if b:
            dc[n0 + exps1.index((a, b - 1)), col] = b / h
        col += 1
    for ib in range(nkm1):
        a, b = exps1[ib]
        w[col, rot_off + ib] = area
        dc[exps1.index((a, b + 1)), col] = h
        dc[n0 + exps1.index((a + 1, b)), col] = -h
        col += 1
    umom = _solve_local(dc.T, w, "vector decomposition", cell)
    hvec = np.zeros((2 * n0, 2 * n0))
    hvec[:n0, :n0] = h0
    hvec[n0:, n0:] = h0
    piv_star = _solve_local(hvec, umom, "vector L2 projector", cell)
    piv_dof = dv @ piv_star

    return ElementOperators(
        cell=cell,
        k=k,
        area=area,
        centroid=centroid.copy(),
        diameter=h,
        n_vertices=nv,
        exps1=exps1,
        exps0=exps0,
        h1=h1,
        h0=h0,
        mom1=mom1,
        quad_x=quad_x,
        quad_w=quad_w,
        v1q=v1q,
        dz=dz,
        pin_star=pin_star,
        pin_dof=pin_dof,
        pi0_star=pi0_star,
        pi0_dof=pi0_dof,
        pgrad_star=pgrad_star,
        dv=dv,
        piv_star=piv_star,
        piv_dof=piv_dof,
        div_star=div_star,
    )


@dataclass
class Operators:
    """Element operators for every cell plus the global DOF map."""

    mesh: object
    k: int
    dofmap: DofMap
    cells: list

    def z_indices(self, cell):
        return self.dofmap.z_indices(self.mesh, cell)

    def v_indices(self, cell):
        return self.dofmap.v_indices(self.mesh, cell)

    def q_indices(self, cell):
        return self.dofmap.q_indices(cell)


def build_operators(mesh, k):
    """Build the element operators of all cells (independent per cell)."""
    _check_degree(k)
    dofmap = DofMap(
        k=k,
        num_vertices=mesh.num_vertices,
        num_edges=mesh.num_edges,
        num_cells=mesh.num_cells,
    )
    cells = [build_cell_operators(mesh, c, k) for c in range(mesh.num_cells)]
    return Operators(mesh=mesh, k=k, dofmap=dofmap, cells=cells)


def interpolate_scalar(ops, f):
    """Concentration-space interpolant of f(x, y) as a global DOF vector."""
    mesh, k = ops.mesh, ops.k
    out = np.zeros(ops.dofmap.n_z)
    out[: mesh.num_vertices] = f(mesh.vertices[:, 0], mesh.vertices[:, 1])
    if k >= 1:
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        out[mesh.num_vertices : mesh.num_vertices + mesh.num_edges] = f(
            mids[:, 0], mids[:, 1]
        )
        base = mesh.num_vertices + mesh.num_edges
        nm = dim_poly(k - 1)
        for c, op in enumerate(ops.cells):
            vals = f(op.quad_x[:, 0], op.quad_x[:, 1])
            for j in range(nm):
                out[base + c * nm + j] = (
                    op.quad_w * vals * op.v1q[:, j]
                ).sum() / op.area
    return out


def interpolate_velocity(ops, fvec, edge_gauss=6):
    """Velocity-space interpolant of fvec(x, y) -> (n, 2) as a DOF vector."""
    mesh, k = ops.mesh, ops.k
    out = np.zeros(ops.dofmap.n_v)
    xg, wg = _edge_gauss01(edge_gauss)
    normals = mesh.edge_normals()
    for e, (a, b) in enumerate(mesh.edges):
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        gpts = pa[None, :] * (1 - xg)[:, None] + pb[None, :] * xg[:, None]
        vn = fvec(gpts[:, 0], gpts[:, 1]) @ normals[e]
        for m in range(k + 1):
            out[e * (k + 1) + m] = (wg * vn * (xg - 0.5) ** m).sum()
    if k >= 1:
        ndiv = dim_poly(k) - 1
        nrot = dim_poly(k - 1)
        base = (k + 1) * mesh.num_edges
        for c, op in enumerate(ops.cells):
            vidx_base = base + c * (ndiv + nrot)
            vals = fvec(op.quad_x[:, 0], op.quad_x[:, 1])
            h, cen = op.diameter, op.centroid
            # divergence moments via the divergence theorem
            for j in range(ndiv):
                a, b = op.exps1[1 + j]
                gx = a / h * op.v1q[:, op.exps1.index((a - 1, b))] if a else 0.0
                gy = b / h * op.v1q[:, op.exps1.index((a, b - 1))] if b else 0.0
                acc = -(op.quad_w * (vals[:, 0] * gx + vals[:, 1] * gy)).sum()
                for i, _, sign, pa, pb, length, normal in _edge_frames(mesh, c):
                    gpts = pa[None, :] * (1 - xg)[:, None] + pb[None, :] * xg[:, None]
                    fv = fvec(gpts[:, 0], gpts[:, 1])
                    mono = _monomial_values([(a, b)], cen, h, gpts)[:, 0]
                    acc += sign * (wg * length * (fv @ normal) * mono).sum()
                out[vidx_base + j] = acc / np.sqrt(op.area)
            xp = np.column_stack(
                (op.quad_x[:, 1] - cen[1], -(op.quad_x[:, 0] - cen[0]))
            )
            for j in range(nrot):
                out[vidx_base + ndiv + j] = (
                    op.quad_w * (vals * xp).sum(axis=1) * op.v1q[:, j]
                ).sum() / op.area
    return out
