"""Coefficient models, well handling, and the benchmark problem definitions.

The transport scheme consumes problems through a uniform interface: porosity
and dispersion constants, a mobility law with declared bounds, optional
gravity, non-negative injection/production rate fields, the injected-mass
data (the product of injection rate and injected concentration), and the net
rate driving the velocity divergence.  A problem with a known closed-form
solution additionally carries the exact fields for error measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidInputError
from .fields import CellwiseField, ConstField, FuncField


def diffusion_tensor(u, phi_val, d_m, d_l, d_t):
    """Dispersion tensor phi [d_m I + |u| (d_l E(u) + d_t (I - E(u)))].

    E(u) is the projection onto the flow direction; at u = 0 the tensor
    degenerates smoothly to phi d_m I.
    """
    u = np.asarray(u, dtype=float)
    nrm = float(np.hypot(u[0], u[1]))
    eye = np.eye(2)
    if nrm == 0.0:
        return phi_val * d_m * eye
    e = np.outer(u, u) / nrm**2
    return phi_val * (d_m * eye + nrm * (d_l * e + d_t * (eye - e)))


def diffusion_tensor_at(uq, phi_q, d_m, d_l, d_t):
    """Vectorized tensor at many points: uq (n, 2), phi_q (n,) -> (n, 2, 2)."""
    uq = np.asarray(uq, dtype=float)
    n = len(uq)
    nrm = np.hypot(uq[:, 0], uq[:, 1])
    out = np.zeros((n, 2, 2))
    out[:, 0, 0] = d_m
    out[:, 1, 1] = d_m
    nz = nrm > 0
    if np.any(nz):
        ux, uy = uq[nz, 0] / nrm[nz], uq[nz, 1] / nrm[nz]
        s = nrm[nz] * (d_l - d_t)
        out[nz, 0, 0] += nrm[nz] * d_t + s * ux * ux
        out[nz, 1, 1] += nrm[nz] * d_t + s * uy * uy
        out[nz, 0, 1] += s * ux * uy
        out[nz, 1, 0] += s * ux * uy
    return out * phi_q[:, None, None]


def viscosity(c, mu0, mobility_ratio):
    """Quarter-power mixing rule, clamped to the physical range [0, 1]."""
    cc = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return mu0 * (1.0 + (mobility_ratio**0.25 - 1.0) * cc) ** (-4)


def mobility(c, kappa_over_mu0, mobility_ratio):
    """a(c) = kappa / mu(c) for the quarter-power viscosity rule."""
    cc = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return kappa_over_mu0 * (1.0 + (mobility_ratio**0.25 - 1.0) * cc) ** 4


@dataclass
class Mobility:
    """Mobility law with its declared bounds (checked during assembly)."""

    func: object
    bounds: tuple

    def __call__(self, c):
        return self.func(np.asarray(c, dtype=float))


@dataclass(frozen=True)
class Well:
    x: float
    y: float
    rate: float
    kind: str  # "injection" | "production"
    c_hat: float = 1.0


@dataclass
class WellSet:
    """Point wells; total injection must balance total production."""

    wells: list

    def __post_init__(self):
        for w in self.wells:
            if w.rate < 0:
                raise InvalidInputError("well rates must be non-negative")
            if w.kind not in ("injection", "production"):
                raise InvalidInputError(f"unknown well kind {w.kind!r}")
        inj = sum(w.rate for w in self.wells if w.kind == "injection")
        prod = sum(w.rate for w in self.wells if w.kind == "production")
        if abs(inj - prod) > 1e-12 * max(inj, prod, 1.0):
            raise InvalidInputError(
                f"well rates violate compatibility: injection {inj}, production {prod}"
            )


def _point_in_cell(mesh, cell, point, tol):
    pts = mesh.cell_points(cell)
    n = len(pts)
    # on-boundary counts as inside
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        d = b - a
        t = np.clip(np.dot(point - a, d) / np.dot(d, d), 0.0, 1.0)
        if np.hypot(*(a + t * d - point)) <= tol:
            return True
    inside = False
    x, y = point
    for i in range(n):
        (x1, y1), (x2, y2) = pts[i], pts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x < xi:
                inside = not inside
    return inside


def locate_cell(mesh, point):
    """Lowest-index cell containing the point (boundary inclusive)."""
    point = np.asarray(point, dtype=float)
    for c in range(mesh.num_cells):
        tol = 1e-9 * mesh.diameters[c]
        if _point_in_cell(mesh, c, point, tol):
            return c
    raise InvalidInputError(f"point {tuple(point)} lies outside the mesh")


def wells_to_density(wellset, mesh):
    """Regularize point wells as cell-constant densities of equal integral.

    Returns (q_plus, q_minus, source) cell fields, where source carries the
    injected-concentration weighting q_plus * c_hat.
    """
    qp, qm, src = {}, {}, {}
    for w in wellset.wells:
        c = locate_cell(mesh, (w.x, w.y))
        density = w.rate / mesh.areas[c]
        if w.kind == "injection":
            qp[c] = qp.get(c, 0.0) + density
            src[c] = src.get(c, 0.0) + density * w.c_hat
        else:
            qm[c] = qm.get(c, 0.0) + density
    return CellwiseField(qp), CellwiseField(qm), CellwiseField(src)


@dataclass
class ManufacturedProblem:
    """Closed-form solution triple with the generalized sources it satisfies."""

    c: object
    u: object
    p: object
    f: object
    g: object


@dataclass
class Problem:
    """Everything the time stepper needs, plus the exact solution if known.

    q_plus, q_minus, source and g_rate map a time t to a cell field; source
    is the injected-mass data (q+ c_hat for wells, f + q+ c for manufactured
    problems), g_rate the divergence data q+ - q-.
    """

    name: str
    bounds: tuple
    final_time: float
    tau: float
    phi: object
    d_m: float
    d_l: float
    d_t: float
    mobility: Mobility
    gamma: object
    c0: object
    q_plus: object = None
    q_minus: object = None
    source: object = None
    g_rate: object = None
    exact: ManufacturedProblem = None
    wells: WellSet = None

    def bind(self, mesh):
        """Resolve point wells into cell densities on a concrete mesh."""
        if self.wells is None or self.q_plus is not None:
            return self
        qp, qm, src = wells_to_density(self.wells, mesh)
        g = CellwiseField(
            {c: qp.values.get(c, 0.0) - qm.values.get(c, 0.0)
             for c in set(qp.values) | set(qm.values)}
        )
        return replace(
            self,
            q_plus=lambda t: qp,
            q_minus=lambda t: qm,
            source=lambda t: src,
            g_rate=lambda t: g,
        )


def _example1_fields():
    def cx(x, y, t):
        return 2.0 * t**2 * x * (x - 1.0) * (2.0 * x - 1.0)

    def c_exact(x, y, t):
        return t**2 * (x**2 * (x - 1.0) ** 2 + y**2 * (y - 1.0) ** 2)

    def u_exact(x, y, t):
        return np.column_stack(
            (cx(np.asarray(x), y, t), cx(np.asarray(y), x, t))
        )

    def p_exact(x, y, t):
        c = c_exact(x, y, t)
        return -0.5 * c**2 - 2.0 * c + 17.0 / 6300.0 * t**4 + 2.0 / 15.0 * t**2

    def g_exact(x, y, t):
        return 2.0 * t**2 * (
            (6.0 * x**2 - 6.0 * x + 1.0) + (6.0 * y**2 - 6.0 * y + 1.0)
        )

    def f_exact(x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        big_x = x**2 * (x - 1.0) ** 2
        big_y = y**2 * (y - 1.0) ** 2
        c_t = 2.0 * t * (big_x + big_y)
        gx = cx(x, y, t)
        gy = cx(y, x, t)
        gxx = 2.0 * t**2 * (6.0 * x**2 - 6.0 * x + 1.0)
        gyy = 2.0 * t**2 * (6.0 * y**2 - 6.0 * y + 1.0)
        nrm = np.hypot(gx, gy)
        # div((0.02 + |grad c|) grad c); the |grad c| = 0 limit is removable
        cross = np.divide(
            gx**2 * gxx + gy**2 * gyy,
            nrm,
            out=np.zeros_like(nrm),
            where=nrm > 0,
        )
        return c_t + (gx**2 + gy**2) - (0.02 + nrm) * (gxx + gyy) - cross

    return ManufacturedProblem(c=c_exact, u=u_exact, p=p_exact, f=f_exact, g=g_exact)


def example1_problem():
    """Unit-square manufactured problem with known smooth solution.

    The transport equation carries a general right-hand side f and a general
    velocity divergence g.  They are mapped onto the scheme's well form by
    splitting g into its positive and negative parts and moving the reaction
    g+ c onto the data side with the known exact concentration.
    """
    ex = _example1_fields()

    def q_plus(t):
        return FuncField(lambda x, y: np.maximum(ex.g(x, y, t), 0.0))

    def q_minus(t):
        return FuncField(lambda x, y: np.maximum(-ex.g(x, y, t), 0.0))

    def source(t):
        return FuncField(
            lambda x, y: ex.f(x, y, t)
            + np.maximum(ex.g(x, y, t), 0.0) * ex.c(x, y, t)
        )

    def g_rate(t):
        return FuncField(lambda x, y: ex.g(x, y, t))

    return Problem(
        name="example1",
        bounds=(0.0, 0.0, 1.0, 1.0),
        final_time=0.01,
        tau=0.002,
        phi=ConstField(1.0),
        d_m=0.02,
        d_l=1.0,
        d_t=1.0,
        mobility=Mobility(func=lambda c: 1.0 / (c + 2.0), bounds=(0.2, 0.7)),
        gamma=None,
        c0=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        q_plus=q_plus,
        q_minus=q_minus,
        source=source,
        g_rate=g_rate,
        exact=ex,
    )


def example2_problem(variant):
    """Quarter-five-spot benchmark on (0, 1000)^2 with corner wells.

    Test A: constant mobility (ratio 1), d_m = 10.  Test B: adverse mobility
    ratio 41 with d_m = 0 (degenerate diffusion, convection dominated).
    """
    variant = str(variant).upper().replace("TEST", "").strip()
    if variant == "A":
        d_m, ratio = 10.0, 1.0
    elif variant == "B":
        d_m, ratio = 0.0, 41.0
    else:
        raise InvalidInputError(f"unknown quarter-five-spot variant {variant!r}")
    a0 = 80.0
    mob = Mobility(
        func=lambda c, a0=a0, ratio=ratio: mobility(c, a0, ratio),
        bounds=(a0, a0 * ratio),
    )
    wells = WellSet(
        [
            Well(x=1000.0, y=1000.0, rate=30.0, kind="injection", c_hat=1.0),
            Well(x=0.0, y=0.0, rate=30.0, kind="production"),
        ]
    )
    return Problem(
        name=f"example2{variant.lower()}",
        bounds=(0.0, 0.0, 1000.0, 1000.0),
        final_time=3600.0,
        tau=36.0,
        phi=ConstField(0.1),
        d_m=d_m,
        d_l=50.0,
        d_t=5.0,
        mobility=mob,
        gamma=None,
        c0=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        wells=wells,
    )
