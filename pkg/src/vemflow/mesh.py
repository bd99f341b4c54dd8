"""Polygonal meshes: generators, exact polygon integration, quadrature, diagnostics.

A mesh is a conforming decomposition of an axis-aligned rectangle into simple,
counter-clockwise polygons.  Edges carry a fixed global orientation (first to
second vertex); the unit normal obtained by rotating the tangent clockwise
points from the left cell into the right cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import linprog
from scipy.spatial import Voronoi

from .exceptions import InvalidInputError, InvalidMeshError

_PAIR_TOL = 1e-12


@dataclass
class Mesh:
    """Conforming polygonal mesh of a rectangle.

    vertices        (Nv, 2) coordinates
    cells           list of CCW vertex loops (int arrays)
    edges           (Ne, 2) vertex pairs, global orientation a -> b
    edge_cells      (Ne, 2) [left, right] cell indices, -1 when missing
    cell_edges      per cell, edge ids aligned with the vertex loop
    cell_edge_signs per cell, +1 if the loop traverses the edge a -> b
    """

    vertices: np.ndarray
    cells: list
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: list
    cell_edge_signs: list
    boundary_edge: np.ndarray
    boundary_vertex: np.ndarray
    bounds: tuple
    areas: np.ndarray = field(repr=False, default=None)
    centroids: np.ndarray = field(repr=False, default=None)
    diameters: np.ndarray = field(repr=False, default=None)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def h(self):
        """Mesh size: largest cell diameter."""
        return float(self.diameters.max())

    def cell_points(self, cell):
        return self.vertices[self.cells[cell]]

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_normals(self):
        """Unit normals in the global edge orientation (tangent rotated by -90)."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack((d[:, 1], -d[:, 0])) / length[:, None]


@dataclass
class MeshQuality:
    """Per-cell shape diagnostics plus the (D1)-(D3) assumption verdicts."""

    diameters: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray
    inradii: np.ndarray
    min_edge_ratio: np.ndarray
    h: float
    rho0: float
    rho1: float
    d1_ok: bool
    d2_ok: bool
    d3_ok: bool

    @property
    def d1_ratio(self):
        """Smallest inscribed-ball radius relative to the cell diameter."""
        return float(np.min(self.inradii / self.diameters))

    @property
    def d2_ratio(self):
        return float(np.min(self.min_edge_ratio))

    @property
    def d3_ratio(self):
        return float(np.min(self.diameters) / self.h)


def polygon_area_centroid(pts):
    """Signed shoelace area and centroid of a closed polygon loop."""
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        raise InvalidMeshError("degenerate polygon with zero area")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def polygon_diameter(pts):
    """Max pairwise vertex distance (exact polygon diameter)."""
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def _check_simple(pts):
    """Reject self-intersecting loops (non-adjacent edge crossings)."""
    n = len(pts)
    segs = [(pts[i], pts[(i + 1) % n]) for i in range(n)]

    def crosses(p1, p2, q1, q2):
        d1 = np.cross(p2 - p1, q1 - p1)
        d2 = np.cross(p2 - p1, q2 - p1)
        d3 = np.cross(q2 - q1, p1 - q1)
        d4 = np.cross(q2 - q1, p2 - q1)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if crosses(*segs[i], *segs[j]):
                return False
    return True


def mesh_from_cells(vertices, cell_loops, bounds=None):
    """Assemble a Mesh from vertex coordinates and CCW cell loops.

    Validates orientation, simplicity, edge pairing and edge lengths.
    """
    vertices = np.asarray(vertices, dtype=float)
    cells = [np.asarray(loop, dtype=int) for loop in cell_loops]
    if bounds is None:
        bounds = (
            float(vertices[:, 0].min()),
            float(vertices[:, 1].min()),
            float(vertices[:, 0].max()),
            float(vertices[:, 1].max()),
        )
    scale = max(bounds[2] - bounds[0], bounds[3] - bounds[1])

    areas = np.empty(len(cells))
    centroids = np.empty((len(cells), 2))
    diameters = np.empty(len(cells))
    for c, loop in enumerate(cells):
        if len(loop) < 3 or len(np.unique(loop)) != len(loop):
            raise InvalidMeshError(f"cell {c}: loop is not a simple cycle")
        pts = vertices[loop]
        area, centroid = polygon_area_centroid(pts)
        if area < 0:
            raise InvalidMeshError(f"cell {c}: loop is clockwise")
        if area <= 1e-14 * scale**2:
            raise InvalidMeshError(f"cell {c}: vanishing area")
        if not _check_simple(pts):
            raise InvalidMeshError(f"cell {c}: self-intersecting loop")
        areas[c] = area
        centroids[c] = centroid
        diameters[c] = polygon_diameter(pts)

    edge_index = {}
    edges = []
    edge_cells = []
    cell_edges = []
    cell_edge_signs = []
    for c, loop in enumerate(cells):
        eids = np.empty(len(loop), dtype=int)
        signs = np.empty(len(loop), dtype=int)
        for i in range(len(loop)):
            a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
            key = (a, b) if a < b else (b, a)
            if key in edge_index:
                eid = edge_index[key]
                if edge_cells[eid][1] != -1:
                    raise InvalidMeshError(f"edge {key} shared by more than two cells")
                if edges[eid] == (a, b):
                    raise InvalidMeshError(
                        f"edge {key} traversed twice in the same direction"
                    )
                edge_cells[eid][1] = c
                signs[i] = -1
            else:
                eid = len(edges)
                edge_index[key] = eid
                edges.append((a, b))
                edge_cells.append([c, -1])
                signs[i] = 1
            eids[i] = eid
        cell_edges.append(eids)
        cell_edge_signs.append(signs)

    edges = np.asarray(edges, dtype=int)
    edge_cells = np.asarray(edge_cells, dtype=int)
    lengths = np.hypot(
        *(vertices[edges[:, 1]] - vertices[edges[:, 0]]).T
    )
    if np.any(lengths <= 1e-14 * scale):
        raise InvalidMeshError("mesh contains a zero-length edge")

    boundary_edge = edge_cells[:, 1] == -1
    boundary_vertex = np.zeros(len(vertices), dtype=bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    return Mesh(
        vertices=vertices,
        cells=cells,
        edges=edges,
        edge_cells=edge_cells,
        cell_edges=cell_edges,
        cell_edge_signs=cell_edge_signs,
        boundary_edge=boundary_edge,
        boundary_vertex=boundary_vertex,
        bounds=tuple(float(b) for b in bounds),
        areas=areas,
        centroids=centroids,
        diameters=diameters,
    )


def _require_partition(mesh):
    """Generated meshes must tile the bounding rectangle exactly."""
    xmin, ymin, xmax, ymax = mesh.bounds
    domain = (xmax - xmin) * (ymax - ymin)
    if abs(mesh.areas.sum() - domain) > 1e-12 * domain:
        raise InvalidMeshError("cell areas do not sum to the domain area")


def build_cartesian(nx, ny, bounds=(0.0, 0.0, 1.0, 1.0)):
    """Regular nx-by-ny rectangular mesh of the given bounding rectangle."""
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise InvalidInputError("nx and ny must be at least 1")
    xmin, ymin, xmax, ymax = map(float, bounds)
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInputError(f"degenerate bounds {bounds}")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    xx, yy = np.meshgrid(xs, ys)
    vertices = np.column_stack((xx.ravel(), yy.ravel()))

    def vid(i, j):
        return j * (nx + 1) + i

    loops = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(ny)
        for i in range(nx)
    ]
    mesh = mesh_from_cells(vertices, loops, bounds=(xmin, ymin, xmax, ymax))
    _require_partition(mesh)
    return mesh


def _clipped_voronoi_cells(seeds, bounds):
    """Voronoi cells clipped to the rectangle via boundary mirroring.

    Mirroring every seed across the four walls makes each original region
    bounded, with the walls appearing exactly as bisectors.
    """
    xmin, ymin, xmax, ymax = bounds
    n = len(seeds)
    mirrors = [seeds.copy() for _ in range(4)]
    mirrors[0][:, 0] = 2.0 * xmin - seeds[:, 0]
    mirrors[1][:, 0] = 2.0 * xmax - seeds[:, 0]
    mirrors[2][:, 1] = 2.0 * ymin - seeds[:, 1]
    mirrors[3][:, 1] = 2.0 * ymax - seeds[:, 1]
    vor = Voronoi(np.vstack([seeds] + mirrors))
    polys = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if not region or -1 in region:
            raise InvalidMeshError(f"unbounded Voronoi region for seed {i}")
        pts = vor.vertices[region]
        # qhull does not guarantee loop order; cells are convex, so sort by angle
        ang = np.arctan2(pts[:, 1] - seeds[i, 1], pts[:, 0] - seeds[i, 0])
        polys.append(pts[np.argsort(ang)])
    return polys


def _wall_code(p, bounds, tol):
    xmin, ymin, xmax, ymax = bounds
    walls = set()
    if abs(p[0] - xmin) <= tol:
        walls.add("L")
    if abs(p[0] - xmax) <= tol:
        walls.add("R")
    if abs(p[1] - ymin) <= tol:
        walls.add("B")
    if abs(p[1] - ymax) <= tol:
        walls.add("T")
    return frozenset(walls)


def _snap_to_walls(p, walls, bounds):
    xmin, ymin, xmax, ymax = bounds
    q = p.copy()
    if "L" in walls:
        q[0] = xmin
    if "R" in walls:
        q[0] = xmax
    if "B" in walls:
        q[1] = ymin
    if "T" in walls:
        q[1] = ymax
    return q


def _collapse_short_edges(vertices, loops, bounds, frac):
    """Merge endpoints of edges shorter than frac times the local cell diameter.

    Voronoi diagrams of relaxed seeds develop arbitrarily short edges near
    quadruple points; collapsing them is what makes (D2) attainable.  Vertices
    on the domain walls only move along their wall, corners never move.
    """
    tol = 1e-9 * max(bounds[2] - bounds[0], bounds[3] - bounds[1])
    for _ in range(4):
        diam = np.array([polygon_diameter(vertices[np.array(l)]) for l in loops])
        edge_min_d = {}
        for c, loop in enumerate(loops):
            for i in range(len(loop)):
                a, b = loop[i], loop[(i + 1) % len(loop)]
                key = (a, b) if a < b else (b, a)
                edge_min_d[key] = min(edge_min_d.get(key, np.inf), diam[c])

        parent = list(range(len(vertices)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        pos = {i: vertices[i] for i in range(len(vertices))}
        changed = False
        for (a, b), dmin in sorted(edge_min_d.items()):
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            pa, pb = pos[ra], pos[rb]
            if np.hypot(*(pb - pa)) >= frac * dmin:
                continue
            wa = _wall_code(pa, bounds, tol)
            wb = _wall_code(pb, bounds, tol)
            if len(wa) > len(wb):
                merged = pa
            elif len(wb) > len(wa):
                merged = pb
            elif wa == wb:
                merged = _snap_to_walls(0.5 * (pa + pb), wa, bounds)
            else:
                continue  # endpoints pinned to different walls
            parent[rb] = ra
            pos[ra] = merged
            changed = True
        if not changed:
            break

        remap = {}
        new_vertices = []
        new_loops = []
        for loop in loops:
            nl = []
            for v in loop:
                r = find(v)
                if r not in remap:
                    remap[r] = len(new_vertices)
                    new_vertices.append(pos[r])
                idx = remap[r]
                if idx not in nl:
                    nl.append(idx)
            if len(nl) < 3:
                raise InvalidMeshError("edge collapse degenerated a cell")
            new_loops.append(nl)
        vertices, loops = np.array(new_vertices), new_loops
    return vertices, loops


def build_voronoi(n_cells, bounds=(0.0, 0.0, 1.0, 1.0), rng_seed=0, lloyd_iterations=3):
    """Clipped Voronoi mesh of n_cells seeds after Lloyd centroid relaxation.

    Deterministic for a fixed seed.  Short edges left over from the relaxation
    are collapsed so that moderate (D1)-(D2) thresholds hold.  Seed collisions
    are retried with a small perturbation; failure to produce n_cells cells
    raises InvalidMeshError.
    """
    n_cells = int(n_cells)
    if n_cells < 1:
        raise InvalidInputError("n_cells must be at least 1")
    xmin, ymin, xmax, ymax = map(float, bounds)
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInputError(f"degenerate bounds {bounds}")
    rng = np.random.default_rng(rng_seed)
    scale = max(xmax - xmin, ymax - ymin)

    seeds = np.column_stack(
        (rng.uniform(xmin, xmax, n_cells), rng.uniform(ymin, ymax, n_cells))
    )
    for attempt in range(6):
        d = seeds[:, None, :] - seeds[None, :, :]
        dist = np.sqrt((d**2).sum(axis=2)) + np.eye(n_cells) * scale
        if n_cells == 1 or dist.min() > 1e-9 * scale:
            break
        seeds = seeds + rng.normal(scale=1e-6 * scale, size=seeds.shape)
        seeds[:, 0] = seeds[:, 0].clip(xmin + 1e-9 * scale, xmax - 1e-9 * scale)
        seeds[:, 1] = seeds[:, 1].clip(ymin + 1e-9 * scale, ymax - 1e-9 * scale)
    else:
        raise InvalidMeshError("could not separate coincident Voronoi seeds")

    for _ in range(int(lloyd_iterations)):
        polys = _clipped_voronoi_cells(seeds, (xmin, ymin, xmax, ymax))
        seeds = np.array([polygon_area_centroid(p)[1] for p in polys])
    polys = _clipped_voronoi_cells(seeds, (xmin, ymin, xmax, ymax))

    # merge coincident corners across cells; keys are deterministic
    decimals = int(np.floor(-np.log10(1e-9 * scale)))
    vert_index = {}
    vertices = []
    loops = []
    for poly in polys:
        loop = []
        for p in poly:
            key = (round(p[0], decimals), round(p[1], decimals))
            if key not in vert_index:
                vert_index[key] = len(vertices)
                vertices.append(p)
            vid = vert_index[key]
            if vid not in loop:
                loop.append(vid)
        if len(loop) < 3:
            raise InvalidMeshError("Voronoi produced a degenerate cell")
        loops.append(loop)
    if len(loops) != n_cells:
        raise InvalidMeshError(
            f"requested {n_cells} Voronoi cells, produced {len(loops)}"
        )
    vertices, loops = _collapse_short_edges(
        np.array(vertices), loops, (xmin, ymin, xmax, ymax), frac=0.1
    )
    mesh = mesh_from_cells(vertices, loops, bounds=(xmin, ymin, xmax, ymax))
    _require_partition(mesh)
    return mesh


def cell_geometry(mesh, cell):
    """(area, centroid, diameter) of one cell, exact shoelace formulas."""
    return (
        float(mesh.areas[cell]),
        mesh.centroids[cell].copy(),
        float(mesh.diameters[cell]),
    )


def _edge_gauss(npts):
    x, w = leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w  # mapped to [0, 1]


def scaled_monomial_integrals(pts, centroid, diameter, max_deg):
    """Exact integrals of all scaled monomials up to max_deg over a polygon.

    Uses the divergence theorem with an x-antiderivative, so only edge Gauss
    rules are needed.  Returns a (max_deg+1, max_deg+1) table indexed [a, b].
    """
    h = diameter
    xg, wg = _edge_gauss(max(1, (max_deg + 2 + 1) // 2 + 1))
    p0 = pts
    p1 = np.roll(pts, -1, axis=0)
    # quadrature nodes on every edge at once: (nedges, ng, 2)
    nodes = p0[:, None, :] * (1.0 - xg)[None, :, None] + p1[:, None, :] * xg[None, :, None]
    sx = (nodes[..., 0] - centroid[0]) / h
    sy = (nodes[..., 1] - centroid[1]) / h
    # n_x * |edge| absorbed: for edge (p0 -> p1), n ds = (dy, -dx) dxi
    dy = (p1 - p0)[:, 1]
    xpow = sx[..., None] ** np.arange(max_deg + 2)  # (ne, ng, max_deg+2)
    ypow = sy[..., None] ** np.arange(max_deg + 1)
    table = np.zeros((max_deg + 1, max_deg + 1))
    for a in range(max_deg + 1):
        for b in range(max_deg + 1 - a):
            vals = xpow[..., a + 1] * ypow[..., b]
            edge_int = (vals * wg[None, :]).sum(axis=1) * dy
            table[a, b] = h / (a + 1) * edge_int.sum()
    return table


def integrate_scaled_monomial(mesh, cell, exponents):
    """Exact integral over a cell of ((x-xc)/h)^a ((y-yc)/h)^b."""
    a, b = int(exponents[0]), int(exponents[1])
    if a < 0 or b < 0:
        raise InvalidInputError("monomial exponents must be non-negative")
    pts = mesh.cell_points(cell)
    table = scaled_monomial_integrals(
        pts, mesh.centroids[cell], mesh.diameters[cell], a + b
    )
    return float(table[a, b])


def _triangle_gauss(order):
    """Positive-weight quadrature on a reference triangle, exact to `order`.

    Collapsed tensor-product Gauss on the unit square mapped by a Duffy-type
    transform; the Jacobian adds one degree in the first direction.
    """
    n = max(1, (order + 2 + 1) // 2)
    x, w = leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    return U.ravel(), V.ravel(), (WU * WV * U).ravel()


def _fan_triangles(pts, centroid):
    """Centroid fan if the centroid lies in the polygon kernel, else None."""
    p1 = pts
    p2 = np.roll(pts, -1, axis=0)
    cross = (p2[:, 0] - p1[:, 0]) * (centroid[1] - p1[:, 1]) - (
        p2[:, 1] - p1[:, 1]
    ) * (centroid[0] - p1[:, 0])
    area2 = np.abs(np.cross(p2 - p1, centroid - p1)).max()
    if np.any(cross <= 1e-12 * area2):
        return None
    return [(centroid, p1[i], p2[i]) for i in range(len(pts))]


def _ear_clip(pts):
    """Ear-clipping triangulation of a simple CCW polygon."""
    ids = list(range(len(pts)))
    tris = []
    guard = 0
    while len(ids) > 3:
        guard += 1
        if guard > 10 * len(pts) ** 2:
            raise InvalidMeshError("ear clipping failed; polygon may be invalid")
        n = len(ids)
        clipped = False
        for k in range(n):
            i0, i1, i2 = ids[k - 1], ids[k], ids[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if np.cross(b - a, c - a) <= 0:
                continue
            ear = True
            for j in ids:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                s1 = np.cross(b - a, p - a)
                s2 = np.cross(c - b, p - b)
                s3 = np.cross(a - c, p - c)
                if s1 >= 0 and s2 >= 0 and s3 >= 0:
                    ear = False
                    break
            if ear:
                tris.append((pts[i0], pts[i1], pts[i2]))
                ids.pop(k)
                clipped = True
                break
        if not clipped:
            raise InvalidMeshError("ear clipping failed; polygon may be invalid")
    tris.append((pts[ids[0]], pts[ids[1]], pts[ids[2]]))
    return tris


def quadrature_points(mesh, cell, order):
    """Interior quadrature with positive weights, exact for degree `order`.

    Fan sub-triangulation from the centroid when possible, ear clipping as a
    fallback for cells that are not star-shaped with respect to it.
    """
    if order < 1:
        raise InvalidInputError("quadrature order must be at least 1")
    pts = mesh.cell_points(cell)
    centroid = mesh.centroids[cell]
    tris = _fan_triangles(pts, centroid)
    if tris is None:
        tris = _ear_clip(pts)
    u, v, w = _triangle_gauss(order)
    xs, ws = [], []
    for a, b, c in tris:
        a, b, c = np.asarray(a), np.asarray(b), np.asarray(c)
        # T(u, v) = a + u (b - a) + u v (c - b); |J| = 2 |tri| u (in weights)
        x = a[None, :] + u[:, None] * (b - a)[None, :] + (u * v)[:, None] * (c - b)[None, :]
        tri_area2 = np.cross(b - a, c - a)
        xs.append(x)
        ws.append(w * tri_area2)
    return np.vstack(xs), np.concatenate(ws)


def _kernel_chebyshev_radius(pts):
    """Radius of the largest ball inside the polygon kernel (LP)."""
    p1 = pts
    p2 = np.roll(pts, -1, axis=0)
    t = p2 - p1
    lengths = np.hypot(t[:, 0], t[:, 1])
    inward = np.column_stack((-t[:, 1], t[:, 0])) / lengths[:, None]
    # maximize r subject to inward . x >= inward . p1 + r
    a_ub = np.column_stack((-inward, np.ones(len(pts))))
    b_ub = -(inward * p1).sum(axis=1)
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    if not res.success:
        return 0.0
    return float(res.x[2])


def check_assumptions(mesh, rho0, rho1):
    """Shape-regularity diagnostics for the mesh assumptions (D1)-(D3).

    (D1) each cell star-shaped wrt a ball of radius rho0 * h_E (kernel test),
    (D2) every edge at least rho0 * h_E, (D3) quasi-uniformity min h_E >= rho1 h.
    """
    lengths = mesh.edge_lengths()
    min_edge_ratio = np.empty(mesh.num_cells)
    inradii = np.empty(mesh.num_cells)
    for c in range(mesh.num_cells):
        min_edge_ratio[c] = lengths[mesh.cell_edges[c]].min() / mesh.diameters[c]
        inradii[c] = _kernel_chebyshev_radius(mesh.cell_points(c))
    h = mesh.h
    return MeshQuality(
        diameters=mesh.diameters.copy(),
        areas=mesh.areas.copy(),
        centroids=mesh.centroids.copy(),
        inradii=inradii,
        min_edge_ratio=min_edge_ratio,
        h=h,
        rho0=float(rho0),
        rho1=float(rho1),
        d1_ok=bool(np.all(inradii >= rho0 * mesh.diameters)),
        d2_ok=bool(np.all(min_edge_ratio >= rho0)),
        d3_ok=bool(mesh.diameters.min() >= rho1 * h),
    )


def write_mesh(mesh, path):
    """Write the plain-text polymesh format (17 significant digits)."""
    lines = ["polymesh 1", f"V {mesh.num_vertices}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"C {mesh.num_cells}")
    for loop in mesh.cells:
        lines.append(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read the plain-text polymesh format written by write_mesh."""
    with open(path) as f:
        tokens = f.read().split()
    it = iter(tokens)
    if next(it) != "polymesh" or next(it) != "1":
        raise InvalidInputError(f"{path}: not a polymesh version 1 file")
    if next(it) != "V":
        raise InvalidInputError(f"{path}: missing vertex section")
    nv = int(next(it))
    vertices = np.array([[float(next(it)), float(next(it))] for _ in range(nv)])
    if next(it) != "C":
        raise InvalidInputError(f"{path}: missing cell section")
    nc = int(next(it))
    loops = []
    for _ in range(nc):
        n = int(next(it))
        loops.append([int(next(it)) for _ in range(n)])
    return mesh_from_cells(vertices, loops)
