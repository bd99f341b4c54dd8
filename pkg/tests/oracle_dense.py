"""Dense reference implementation of one lowest-order time step.

Everything here is intentionally written from scratch against the scheme
definitions: dense numpy matrices, no sparse machinery, quadrature and
projectors rebuilt from their defining equations.  Only the mesh arrays are
shared with the production code (they are input data), so the comparison
exercises assembly, boundary conditions, and both linear solves end to end.

Scope: degree 0, both stabilization recipes, gravity-free problems.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss


def _gauss01(n):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def fan_quadrature(pts, centroid, n=2):
    """Centroid-fan quadrature with the collapsed-square triangle rule.

    Mirrors the documented interior rule: one triangle per polygon edge,
    mapped from the unit square by T(u,v) = A + u(B-A) + uv(C-B) with
    A the centroid; n Gauss points per direction.
    """
    u1, wu = _gauss01(n)
    uu, vv = np.meshgrid(u1, u1, indexing="ij")
    ww = np.outer(wu, wu)
    xs, ws = [], []
    m = len(pts)
    for i in range(m):
        a, b, c = centroid, pts[i], pts[(i + 1) % m]
        x = (
            a[None, :]
            + uu.ravel()[:, None] * (b - a)[None, :]
            + (uu * vv).ravel()[:, None] * (c - b)[None, :]
        )
        jac = np.cross(b - a, c - a)
        xs.append(x)
        ws.append(ww.ravel() * uu.ravel() * jac)
    return np.vstack(xs), np.concatenate(ws)


class DenseReference:
    """Rebuilds the degree-0 scheme with dense matrices on a given mesh."""

    def __init__(self, mesh, recipe_variant="dofi-dofi", sigma=1e-3):
        self.mesh = mesh
        self.variant = recipe_variant
        self.sigma = sigma
        self.nz = mesh.num_vertices
        self.nv = mesh.num_edges
        self.nq = mesh.num_cells
        self._geometry()

    # -- geometry and projectors -----------------------------------------
    def _geometry(self):
        mesh = self.mesh
        self.cell_data = []
        for c in range(mesh.num_cells):
            loop = list(mesh.cells[c])
            pts = mesh.vertices[loop]
            nv = len(loop)
            x, y = pts[:, 0], pts[:, 1]
            xn, yn = np.roll(x, -1), np.roll(y, -1)
            cross = x * yn - xn * y
            area = 0.5 * cross.sum()
            cen = np.array(
                [((x + xn) * cross).sum(), ((y + yn) * cross).sum()]
            ) / (6.0 * area)
            diam = max(
                np.hypot(px - qx, py - qy)
                for px, py in pts
                for qx, qy in pts
            )
            qx, qw = fan_quadrature(pts, cen, n=2)

            edges = []
            for i in range(nv):
                eid = mesh.cell_edges[c][i]
                sign = int(mesh.cell_edge_signs[c][i])
                va, vb = mesh.edges[eid]
                pa, pb = mesh.vertices[va], mesh.vertices[vb]
                length = np.hypot(*(pb - pa))
                n_glob = np.array([(pb - pa)[1], -(pb - pa)[0]]) / length
                edges.append(
                    dict(eid=eid, sign=sign, a=int(va), b=int(vb),
                         pa=pa, pb=pb, length=length, n_glob=n_glob)
                )
            per = sum(e["length"] for e in edges)

            def mono(p):
                sx = (p[:, 0] - cen[0]) / diam
                sy = (p[:, 1] - cen[1]) / diam
                return np.column_stack((np.ones(len(p)), sx, sy))

            # H1 projector onto P1 from the variational definition
            g = np.zeros((3, 3))
            g[1, 1] = g[2, 2] = area / diam**2
            xg, wg = _gauss01(4)
            for e in edges:
                gp = e["pa"][None, :] * (1 - xg)[:, None] + e["pb"][None, :] * xg[:, None]
                g[0] += mono(gp).T @ (wg * e["length"]) / per
            bmat = np.zeros((3, self.nz))
            loc = {v: i for i, v in enumerate(loop)}
            for e in edges:
                n_out = e["sign"] * e["n_glob"]
                half = 0.5 * e["length"]
                for comp in (1, 2):
                    flux = n_out[comp - 1] / diam
                    bmat[comp, e["a"]] += flux * half
                    bmat[comp, e["b"]] += flux * half
                bmat[0, e["a"]] += half / per
                bmat[0, e["b"]] += half / per
            pin = np.linalg.solve(g, bmat[:, loop])  # 3 x nv, local columns

            # gradient projection: area grad = boundary integral of z n
            pgrad = np.zeros((2, nv))
            for i, e in enumerate(edges):
                n_out = e["sign"] * e["n_glob"]
                half = 0.5 * e["length"]
                for comp in range(2):
                    pgrad[comp, loc[e["a"]]] += n_out[comp] * half / area
                    pgrad[comp, loc[e["b"]]] += n_out[comp] * half / area

            # vector projection of an edge-flux field onto constants
            piv = np.zeros((2, nv))
            mom1 = (qw[:, None] * mono(qx)[:, 1:]).sum(axis=0)  # int m1, m2
            for i, e in enumerate(edges):
                sgn_len = e["sign"] * e["length"]
                # boundary part of (v, grad m_alpha) for alpha = (1,0), (0,1)
                gp = e["pa"][None, :] * (1 - xg)[:, None] + e["pb"][None, :] * xg[:, None]
                me = mono(gp)
                int_m1 = (wg * e["length"] * me[:, 1]).sum()
                int_m2 = (wg * e["length"] * me[:, 2]).sum()
                piv[0, i] += diam / area * e["sign"] * int_m1
                piv[1, i] += diam / area * e["sign"] * int_m2
            div_row = np.array([e["sign"] * e["length"] for e in edges]) / area
            piv[0] -= diam / area * mom1[0] * div_row
            piv[1] -= diam / area * mom1[1] * div_row

            # DOF-coordinate projectors for the stabilization slices
            vm = mono(pts)  # vertex values of the monomials
            pin_dof = vm @ pin
            dv = np.zeros((nv, 2))
            for i, e in enumerate(edges):
                dv[i] = e["n_glob"]
            piv_dof = dv @ piv

            self.cell_data.append(
                dict(loop=loop, pts=pts, area=area, cen=cen, diam=diam,
                     qx=qx, qw=qw, mono=mono, edges=edges, pin=pin,
                     pin_dof=pin_dof, pgrad=pgrad, piv=piv, piv_dof=piv_dof,
                     div_row=div_row)
            )

    def _stab(self, cd, cons, nu, scale, proj_dof):
        n = proj_dof.shape[0]
        slc = np.eye(n) - proj_dof
        if self.variant == "dofi-dofi":
            return nu * slc.T @ (scale * np.eye(n)) @ slc
        d = np.maximum(np.diag(cons) / scale, self.sigma * nu)
        return slc.T @ (scale * np.diag(d)) @ slc

    # -- global forms ------------------------------------------------------
    def mass(self, phi_field):
        m = np.zeros((self.nz, self.nz))
        for c, cd in enumerate(self.cell_data):
            phi_q = phi_field(c, cd["qx"])
            hw = (cd["mono"](cd["qx"]) * (cd["qw"] * phi_q)[:, None]).T @ cd["mono"](cd["qx"])
            cons = cd["pin"].T @ hw @ cd["pin"]
            nu = abs((cd["qw"] * phi_q).sum() / cd["area"])
            local = cons + self._stab(cd, cons, nu, cd["area"], cd["pin_dof"])
            ix = np.array(cd["loop"])
            m[np.ix_(ix, ix)] += local
        return m

    def diffusion(self, u, phi_field, d_m, d_l, d_t):
        m = np.zeros((self.nz, self.nz))
        for c, cd in enumerate(self.cell_data):
            eidx = [e["eid"] for e in cd["edges"]]
            uc = cd["piv"] @ u[eidx]  # constant projected velocity
            nrm = np.hypot(*uc)
            eye = np.eye(2)
            if nrm > 0:
                ee = np.outer(uc, uc) / nrm**2
                tensor = d_m * eye + nrm * (d_l * ee + d_t * (eye - ee))
            else:
                tensor = d_m * eye
            phi_q = phi_field(c, cd["qx"])
            phi_int = (cd["qw"] * phi_q).sum()
            cons = cd["pgrad"].T @ (phi_int * tensor) @ cd["pgrad"]
            nu = abs(phi_int / cd["area"]) * (d_m + d_t * nrm)
            local = cons + self._stab(cd, cons, nu, 1.0, cd["pin_dof"])
            ix = np.array(cd["loop"])
            m[np.ix_(ix, ix)] += local
        return m

    def convection(self, u, qp_field, qm_field):
        m = np.zeros((self.nz, self.nz))
        for c, cd in enumerate(self.cell_data):
            eidx = [e["eid"] for e in cd["edges"]]
            uc = cd["piv"] @ u[eidx]
            mono_q = cd["mono"](cd["qx"])
            # t1[i, j] = int (u . grad phi_j) Pi phi_i
            udg = uc[0] * cd["pgrad"][0] + uc[1] * cd["pgrad"][1]  # (nv,)
            int_pi = cd["pin"].T @ (mono_q.T @ cd["qw"])  # int Pi phi_i
            t1 = np.outer(int_pi, udg)
            r = qp_field(c, cd["qx"]) + qm_field(c, cd["qx"])
            hw = (mono_q * (cd["qw"] * r)[:, None]).T @ mono_q
            t2 = cd["pin"].T @ hw @ cd["pin"]
            local = 0.5 * (t1 + t2 - t1.T)
            ix = np.array(cd["loop"])
            m[np.ix_(ix, ix)] += local
        return m

    def darcy_mass(self, c_dofs, mobility):
        m = np.zeros((self.nv, self.nv))
        for c, cd in enumerate(self.cell_data):
            mono_q = cd["mono"](cd["qx"])
            cq = mono_q @ (cd["pin"] @ c_dofs[cd["loop"]])
            inv_a = 1.0 / np.asarray(mobility(cq))
            wint = (cd["qw"] * inv_a).sum()
            cons = cd["piv"].T @ (wint * np.eye(2)) @ cd["piv"]
            c_mean = float(cd["qw"] @ cq) / cd["area"]
            nu = abs(1.0 / float(np.asarray(mobility(np.array([c_mean])))[0]))
            local = cons + self._stab(cd, cons, nu, cd["area"], cd["piv_dof"])
            eidx = [e["eid"] for e in cd["edges"]]
            m[np.ix_(eidx, eidx)] += local
        return m

    def divergence(self):
        b = np.zeros((self.nq, self.nv))
        for c, cd in enumerate(self.cell_data):
            for i, e in enumerate(cd["edges"]):
                b[c, e["eid"]] -= e["sign"] * e["length"]
        return b

    def load_concentration(self, src_field):
        out = np.zeros(self.nz)
        for c, cd in enumerate(self.cell_data):
            mono_q = cd["mono"](cd["qx"])
            data = src_field(c, cd["qx"])
            out[cd["loop"]] += cd["pin"].T @ (mono_q.T @ (cd["qw"] * data))
        return out

    def load_mass(self, g_field):
        out = np.zeros(self.nq)
        for c, cd in enumerate(self.cell_data):
            out[c] = (cd["qw"] * g_field(c, cd["qx"])).sum()
        return out

    # -- solves -------------------------------------------------------------
    def darcy_solve(self, problem, c_dofs, t):
        a = self.darcy_mass(c_dofs, problem.mobility)
        b = self.divergence()
        gb = self.load_mass(problem.g_rate(t))
        free = np.nonzero(~self.mesh.boundary_edge)[0]
        nf, nq = len(free), self.nq
        areas = np.array([cd["area"] for cd in self.cell_data])
        kkt = np.zeros((nf + nq + 1, nf + nq + 1))
        kkt[:nf, :nf] = a[np.ix_(free, free)]
        kkt[:nf, nf : nf + nq] = b[:, free].T
        kkt[nf : nf + nq, :nf] = b[:, free]
        kkt[nf : nf + nq, -1] = areas
        kkt[-1, nf : nf + nq] = areas
        rhs = np.concatenate((np.zeros(nf), -gb, [0.0]))
        sol = np.linalg.solve(kkt, rhs)
        u = np.zeros(self.nv)
        u[free] = sol[:nf]
        return u, sol[nf : nf + nq]

    def step(self, problem, c_prev, u_prev, tau, t_n, mass=None):
        """One transport step followed by a Darcy refresh."""
        if mass is None:
            mass = self.mass(problem.phi)
        theta = self.convection(u_prev, problem.q_plus(t_n), problem.q_minus(t_n))
        diff = self.diffusion(u_prev, problem.phi, problem.d_m, problem.d_l,
                              problem.d_t)
        b = self.load_concentration(problem.source(t_n))
        c_new = np.linalg.solve(mass + tau * (theta + diff), tau * b + mass @ c_prev)
        u_new, p_new = self.darcy_solve(problem, c_new, t_n)
        return c_new, u_new, p_new
