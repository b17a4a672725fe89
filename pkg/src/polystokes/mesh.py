"""Polygonal meshes of the unit square: representation, the composite
four-quadrant family, star-fan subtriangulation, shape-regularity estimates
and a small text file format.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _reference_meshes
from .errors import NotStarShaped, ParseError, TopologyError

KERNEL_SAMPLES = 64


# ------------------------------------------------------------------ geometry

def signed_area(coords):
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class CellGeometry:
    area: float
    centroid: np.ndarray
    diameter: float
    normals: np.ndarray
    lengths: np.ndarray


def geometry(coords):
    """Area, centroid, diameter and outward edge normals of a CCW polygon.

    Edge ``i`` joins vertex ``i`` to vertex ``i + 1``.
    """
    coords = np.asarray(coords, dtype=float)
    nxt = np.roll(coords, -1, axis=0)
    cross = coords[:, 0] * nxt[:, 1] - nxt[:, 0] * coords[:, 1]
    area = 0.5 * cross.sum()
    centroid = ((coords + nxt) * cross[:, None]).sum(axis=0) / (6.0 * area)
    diff = coords[:, None, :] - coords[None, :, :]
    diameter = float(np.sqrt((diff ** 2).sum(-1)).max())
    tangents = nxt - coords
    lengths = np.hypot(tangents[:, 0], tangents[:, 1])
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]]) / lengths[:, None]
    return CellGeometry(float(area), centroid, diameter, normals, lengths)


# --------------------------------------------------------------------- mesh

class PolygonalMesh:
    """Vertices plus counterclockwise cell loops.

    Edges are the unique vertex pairs of consecutive loop entries, stored as
    ``(lo, hi)`` with ``edge_cells[e] = (cell traversing lo->hi, cell
    traversing hi->lo)`` and ``-1`` for a missing side.
    """

    def __init__(self, vertices, cells, level=0):
        vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        vertices.setflags(write=False)
        self.vertices = vertices
        self.cells = tuple(tuple(int(i) for i in c) for c in cells)
        self.level = int(level)
        self._validate()

    def _validate(self):
        nv = len(self.vertices)
        for c, loop in enumerate(self.cells):
            if len(loop) < 3:
                raise TopologyError(f"cell {c} has fewer than three vertices")
            if min(loop) < 0 or max(loop) >= nv:
                raise TopologyError(f"cell {c} references a missing vertex")
            if len(set(loop)) != len(loop):
                raise TopologyError(f"cell {c} repeats a vertex")
            if signed_area(self.vertices[list(loop)]) <= 0.0:
                raise TopologyError(f"cell {c} is not counterclockwise")
        self._edges  # noqa: B018  builds and checks edge incidence

    @cached_property
    def _edges(self):
        index = {}
        sides = []
        cell_edges = []
        for c, loop in enumerate(self.cells):
            local = []
            for a, b in zip(loop, loop[1:] + loop[:1]):
                key = (min(a, b), max(a, b))
                e = index.get(key)
                if e is None:
                    e = index[key] = len(sides)
                    sides.append([-1, -1])
                side = 0 if a < b else 1
                if sides[e][side] != -1:
                    raise TopologyError(f"edge {key} is traversed twice in the same direction")
                sides[e][side] = c
                local.append(e)
            cell_edges.append(np.array(local, dtype=int))
        edges = np.array(list(index), dtype=int).reshape(-1, 2)
        return edges, np.array(sides, dtype=int).reshape(-1, 2), cell_edges

    @property
    def edges(self):
        return self._edges[0]

    @property
    def edge_cells(self):
        return self._edges[1]

    @property
    def cell_edges(self):
        return self._edges[2]

    @cached_property
    def boundary_edge_flags(self):
        return (self.edge_cells == -1).any(axis=1)

    @cached_property
    def boundary_vertex_flags(self):
        flags = np.zeros(len(self.vertices), dtype=bool)
        flags[self.edges[self.boundary_edge_flags].ravel()] = True
        return flags

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def cell_coords(self, c):
        return self.vertices[list(self.cells[c])]

    def geometry(self, c):
        return geometry(self.cell_coords(c))

    @cached_property
    def diameters(self):
        return np.array([self.geometry(c).diameter for c in range(self.n_cells)])

    @property
    def h(self):
        return float(self.diameters.max())

    @cached_property
    def areas(self):
        return np.array([signed_area(self.cell_coords(c)) for c in range(self.n_cells)])

    def __repr__(self):
        return (f"PolygonalMesh(level={self.level}, vertices={self.n_vertices}, "
                f"cells={self.n_cells}, edges={self.n_edges})")


def mesh_from_edges(vertices, edges, level=0):
    """Recover the bounded faces of a planar straight-line graph."""
    vertices = np.asarray(vertices, dtype=float)
    nbrs = {}
    for a, b in edges:
        nbrs.setdefault(a, []).append(b)
        nbrs.setdefault(b, []).append(a)
    order = {}
    for v, adj in nbrs.items():
        d = vertices[adj] - vertices[v]
        ang = np.arctan2(d[:, 1], d[:, 0])
        order[v] = [adj[i] for i in np.argsort(ang, kind="stable")]
    visited = set()
    cells = []
    for a, b in sorted({(a, b) for a, b in edges} | {(b, a) for a, b in edges}):
        if (a, b) in visited:
            continue
        loop = []
        u, v = a, b
        while (u, v) not in visited:
            visited.add((u, v))
            loop.append(u)
            around = order[v]
            w = around[(around.index(u) - 1) % len(around)]
            u, v = v, w
        if signed_area(vertices[loop]) > 0:
            i = loop.index(min(loop))
            cells.append(tuple(loop[i:] + loop[:i]))
    cells.sort()
    return PolygonalMesh(vertices, cells, level)


# ---------------------------------------------------------- composite family

QUADRANT_ORIGINS = ((0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5))


def _quadrant_of(point):
    return int(point[0] >= 0.5) + 2 * int(point[1] >= 0.5)


def _block_patterns():
    """Level-0 cells of each quadrant in quadrant-local unit coordinates."""
    base = mesh_from_edges(_reference_meshes.LEVEL0_VERTICES, _reference_meshes.LEVEL0_EDGES)
    quadrant_ids = {0: 0, 1: 1, 3: 2, 2: 3}
    patterns = [[] for _ in range(4)]
    for c in range(base.n_cells):
        coords = base.cell_coords(c)
        q = quadrant_ids[_quadrant_of(coords.mean(axis=0))]
        origin = np.array(QUADRANT_ORIGINS[q])
        patterns[q].append((coords - origin) / 0.5)
    return patterns


def _distort_quadrant1(vertices, level):
    x, y = vertices[:, 0], vertices[:, 1]
    inside = (x > 0.0) & (x < 0.5) & (y > 0.0) & (y < 0.5)
    amp = 0.1 * 2.0 ** (-level)
    out = vertices.copy()
    xi, yi = x[inside], y[inside]
    out[inside, 0] += amp * np.sin(2 * np.pi * xi) * np.sin(2 * np.pi * yi)
    out[inside, 1] += amp * np.sin(4 * np.pi * xi) * np.sin(2 * np.pi * yi)
    return out


def _generated_mesh(level):
    patterns = _block_patterns()
    blocks = 2 ** level
    size = 0.5 / blocks
    keys = {}
    coords = []
    cells = []

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12))
        if key not in keys:
            keys[key] = len(coords)
            coords.append(p)
        return keys[key]

    for q, origin in enumerate(QUADRANT_ORIGINS):
        for j in range(blocks):
            for i in range(blocks):
                shift = np.array([origin[0] + size * i, origin[1] + size * j])
                for poly in patterns[q]:
                    cells.append(tuple(vid(shift + size * p) for p in poly))
    vertices = _distort_quadrant1(np.array(coords), level)
    return PolygonalMesh(vertices, cells, level)


def build_paper_mesh(level):
    """Composite mesh of level ``level`` on the unit square.

    Levels 0 and 1 use the hard-coded reference tables; finer levels tile
    each quadrant with ``4**level`` copies of its level-0 block and displace
    the interior vertices of the distorted quadrant by a smooth map.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level == 0:
        return mesh_from_edges(_reference_meshes.LEVEL0_VERTICES, _reference_meshes.LEVEL0_EDGES, 0)
    if level == 1:
        return mesh_from_edges(_reference_meshes.LEVEL1_VERTICES, _reference_meshes.LEVEL1_EDGES, 1)
    return _generated_mesh(level)


# ---------------------------------------------------------- subtriangulation

@dataclass(frozen=True)
class SubTriangulation:
    """Triangles over ``points``: the cell vertices, then the star point if any."""

    cell: object
    polygon: np.ndarray
    points: np.ndarray
    triangles: np.ndarray
    star_point: object = None

    @cached_property
    def _geometry(self):
        return geometry(self.polygon)

    @property
    def centroid(self):
        return self._geometry.centroid

    @property
    def diameter(self):
        return self._geometry.diameter

    @property
    def area(self):
        return self._geometry.area

    def triangle_coords(self):
        return self.points[self.triangles]

    def triangle_areas(self):
        t = self.triangle_coords()
        e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _fan_areas(coords, apex):
    n = len(coords)
    others = [(apex + j) % n for j in range(1, n)]
    tris = [(apex, others[j], others[j + 1]) for j in range(n - 2)]
    p = coords[np.array(tris)]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return tris, 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def kernel_center(coords, samples=KERNEL_SAMPLES):
    """Sampled center of the largest ball inside the star kernel.

    Returns ``(center, radius)``; ``radius <= 0`` when no sample lies in the
    kernel.
    """
    coords = np.asarray(coords, dtype=float)
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    t = (np.arange(samples) + 0.5) / samples
    gx, gy = np.meshgrid(lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1]))
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    tang = np.roll(coords, -1, axis=0) - coords
    inward = np.column_stack([-tang[:, 1], tang[:, 0]])
    inward /= np.hypot(inward[:, 0], inward[:, 1])[:, None]
    dist = (pts[:, None, :] - coords[None, :, :]) * inward[None, :, :]
    radius = dist.sum(-1).min(axis=1)
    best = int(np.argmax(radius))
    return pts[best], float(radius[best])


def subtriangulate_polygon(coords, cell=None):
    """Fan subtriangulation without new boundary nodes.

    Fans from the vertex whose fan has the largest smallest triangle (first
    such vertex on ties); falls back to a sampled kernel center.
    """
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    area = signed_area(coords)
    tol = 1e-10 * area
    best = None
    for apex in range(n):
        tris, areas = _fan_areas(coords, apex)
        if areas.min() > tol and abs(areas.sum() - area) <= 1e-12 * area:
            score = areas.min()
            if best is None or score > best[0] * (1 + 1e-12):
                best = (score, tris)
    if best is not None:
        return SubTriangulation(cell, coords, coords, np.array(best[1], dtype=int))
    center, radius = kernel_center(coords)
    if radius <= 0:
        raise NotStarShaped(f"cell {cell}: no admissible star point found")
    points = np.vstack([coords, center])
    tris = np.array([(n, j, (j + 1) % n) for j in range(n)], dtype=int)
    return SubTriangulation(cell, coords, points, tris, center)


def subtriangulate(mesh, cell):
    return subtriangulate_polygon(mesh.cell_coords(cell), cell)


# -------------------------------------------------------- shape regularity

@dataclass(frozen=True)
class ShapeReport:
    gamma1: np.ndarray
    gamma2: np.ndarray

    @property
    def min_gamma1(self):
        return float(self.gamma1.min())

    @property
    def min_gamma2(self):
        return float(self.gamma2.min())


def cell_shape(coords):
    coords = np.asarray(coords, dtype=float)
    h = geometry(coords).diameter
    _, radius = kernel_center(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    dist[np.diag_indices(len(coords))] = np.inf
    return radius / h, dist.min() / h


def check_shape_regularity(mesh):
    """Per-cell estimates of the star-ball ratio and vertex-distance ratio."""
    values = np.array([cell_shape(mesh.cell_coords(c)) for c in range(mesh.n_cells)])
    return ShapeReport(values[:, 0], values[:, 1])


# --------------------------------------------------------------------- I/O

def save_mesh(mesh, path):
    lines = ["polymesh 1", f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"cells {mesh.n_cells}")
    lines += [" ".join(str(i) for i in (len(c),) + c) for c in mesh.cells]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, level=0):
    """Read a mesh file; clockwise cell loops are reversed."""
    with open(path, encoding="utf-8") as fh:
        rows = [(i + 1, line.split()) for i, line in enumerate(fh)]
    rows = [(i, r) for i, r in rows if r]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(rows):
            raise ParseError("unexpected end of file", rows[-1][0] + 1 if rows else 1)
        pos += 1
        return rows[pos - 1]

    def header(word):
        line, tok = take()
        if len(tok) != 2 or tok[0] != word:
            raise ParseError(f"expected '{word} <count>'", line)
        try:
            return int(tok[1])
        except ValueError:
            raise ParseError(f"bad count {tok[1]!r}", line) from None

    line, tok = take()
    if tok != ["polymesh", "1"]:
        raise ParseError("expected header 'polymesh 1'", line)
    vertices = []
    for _ in range(header("vertices")):
        line, tok = take()
        if len(tok) != 2:
            raise ParseError("expected two coordinates", line)
        try:
            vertices.append((float(tok[0]), float(tok[1])))
        except ValueError:
            raise ParseError("bad coordinate", line) from None
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    cells = []
    for _ in range(header("cells")):
        line, tok = take()
        try:
            ints = [int(t) for t in tok]
        except ValueError:
            raise ParseError("bad vertex index", line) from None
        if ints[0] != len(ints) - 1:
            raise ParseError("vertex count does not match the loop length", line)
        loop = ints[1:]
        if min(loop, default=0) < 0 or max(loop, default=0) >= len(vertices):
            raise TopologyError(f"line {line}: cell references a missing vertex")
        if len(loop) >= 3 and signed_area(vertices[loop]) < 0:
            loop = loop[::-1]
        cells.append(tuple(loop))
    if pos != len(rows):
        raise ParseError("trailing content", rows[pos][0])
    return PolygonalMesh(vertices, cells, level)


