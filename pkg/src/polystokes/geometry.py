"""Polygonal meshes on the unit square: generators, validation, quadrature.

Meshes are plain vertex/cell-ring containers with derived edge connectivity.
All generators are deterministic given their arguments; the voronoi and
random families draw from a seeded numpy Generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi

__all__ = [
    "PolygonalMesh",
    "GeometryReport",
    "QuadratureRule",
    "generate_mesh",
    "import_mesh",
    "export_mesh",
    "validate_geometry",
    "polygon_quadrature",
    "edge_quadrature",
    "polygon_area",
    "polygon_centroid",
    "polygon_diameter",
    "triangle_rule",
    "gauss_lobatto_points",
]

MESH_FAMILIES = ("hexagonal", "voronoi", "random_polygons", "diamond")

# lattice sizes reproducing the hexagonal mesh sequence counts
# (level 1: 62 vertices / 91 edges / 30 cells, and so on)
_HEX_LEVELS = {1: (5, 6), 2: (10, 12), 3: (15, 18), 4: (20, 23), 5: (40, 46), 6: (80, 93)}

_MERGE_TOL = 1e-9


class MeshError(ValueError):
    """Invalid mesh data (orientation, connectivity or coverage)."""


# ---------------------------------------------------------------------------
# polygon primitives
# ---------------------------------------------------------------------------

def polygon_area(verts):
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(verts):
    x, y = verts[:, 0], verts[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = 0.5 * np.sum(cross)
    cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * a)
    cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(verts):
    d = verts[:, None, :] - verts[None, :, :]
    return np.sqrt(np.max(np.sum(d * d, axis=2)))


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return np.sign(v)

    return (orient(p1, p2, q1) != orient(p1, p2, q2)
            and orient(q1, q2, p1) != orient(q1, q2, p2))


def _ring_is_simple(verts):
    n = len(verts)
    for i in range(n):
        a1, a2 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, verts[j], verts[(j + 1) % n]):
                return False
    return True


# ---------------------------------------------------------------------------
# mesh container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolygonalMesh:
    """Planar polygonal subdivision with derived connectivity.

    ``cells`` are CCW vertex-index rings.  ``edges`` holds unique vertex
    pairs (lo, hi).  ``cell_edges[c][i]`` is the edge index of the ring
    segment from ``cells[c][i]`` to ``cells[c][i+1]``.
    """

    vertices: np.ndarray
    cells: list
    edges: np.ndarray
    cell_edges: list
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    h: float
    cell_areas: np.ndarray = field(repr=False, default=None)
    cell_diameters: np.ndarray = field(repr=False, default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_cells(self):
        return len(self.cells)

    def cell_polygon(self, c):
        return self.vertices[self.cells[c]]


def build_mesh(vertices, cells, check_domain_area=None):
    """Assemble a PolygonalMesh and enforce its invariants.

    check_domain_area: if given, total cell area must match it to 1e-12
    relative.
    """
    vertices = np.asarray(vertices, dtype=float)
    rings = [np.asarray(c, dtype=np.int64) for c in cells]

    areas = np.empty(len(rings))
    diams = np.empty(len(rings))
    for ci, ring in enumerate(rings):
        if len(ring) < 3 or len(np.unique(ring)) != len(ring):
            raise MeshError(f"cell {ci}: ring must have >=3 distinct vertices")
        poly = vertices[ring]
        a = polygon_area(poly)
        if a <= 0:
            raise MeshError(f"cell {ci}: ring is clockwise or degenerate (area {a:g})")
        if not _ring_is_simple(poly):
            raise MeshError(f"cell {ci}: ring is self-intersecting")
        areas[ci] = a
        diams[ci] = polygon_diameter(poly)

    edge_index = {}
    edge_count = {}
    cell_edges = []
    for ci, ring in enumerate(rings):
        ce = np.empty(len(ring), dtype=np.int64)
        for i in range(len(ring)):
            a, b = int(ring[i]), int(ring[(i + 1) % len(ring)])
            key = (a, b) if a < b else (b, a)
            if key not in edge_index:
                edge_index[key] = len(edge_index)
            ce[i] = edge_index[key]
            edge_count[key] = edge_count.get(key, 0) + 1
        cell_edges.append(ce)

    edges = np.array(sorted(edge_index, key=edge_index.get), dtype=np.int64)
    counts = np.array([edge_count[tuple(e)] for e in edges])
    if np.any(counts > 2):
        bad = int(np.argmax(counts > 2))
        raise MeshError(f"edge {tuple(edges[bad])} shared by more than two cells")

    n_v, n_e, n_k = len(vertices), len(edges), len(rings)
    if n_v - n_e + n_k != 1:
        raise MeshError(f"Euler relation violated: {n_v} - {n_e} + {n_k} != 1")

    boundary_edges = counts == 1
    boundary_verts = np.zeros(n_v, dtype=bool)
    boundary_verts[edges[boundary_edges].ravel()] = True

    if check_domain_area is not None:
        total = float(np.sum(areas))
        if abs(total - check_domain_area) > 1e-12 * check_domain_area:
            raise MeshError(f"cells cover area {total!r}, expected {check_domain_area!r}")

    return PolygonalMesh(
        vertices=vertices, cells=rings, edges=edges, cell_edges=cell_edges,
        boundary_vertex_flags=boundary_verts, boundary_edge_flags=boundary_edges,
        h=float(np.max(diams)), cell_areas=areas, cell_diameters=diams)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _clipped_voronoi_cells(points):
    """Voronoi cells of points in (0,1)^2, clipped exactly to the square.

    Mirrors the generators across the four sides so every cell of an
    original point is bounded and its boundary pieces land on the square.
    """
    pts = np.asarray(points, dtype=float)
    mirrors = [pts * [-1.0, 1.0], pts * [1.0, -1.0],
               np.column_stack([2.0 - pts[:, 0], pts[:, 1]]),
               np.column_stack([pts[:, 0], 2.0 - pts[:, 1]])]
    vor = Voronoi(np.vstack([pts] + mirrors))
    polys = []
    for i in range(len(pts)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region:
            raise MeshError("unbounded Voronoi cell; generator outside (0,1)^2?")
        poly = vor.vertices[region]
        if polygon_area(poly) < 0:
            poly = poly[::-1]
        # snap coordinates that should sit on the square boundary
        poly = np.where(np.abs(poly) < _MERGE_TOL, 0.0, poly)
        poly = np.where(np.abs(poly - 1.0) < _MERGE_TOL, 1.0, poly)
        polys.append(poly)
    return polys


def _mesh_from_polygons(polys):
    """Merge per-cell polygons into a shared-vertex mesh."""
    vmap = {}
    verts = []
    rings = []
    for poly in polys:
        ring = []
        for p in poly:
            key = (round(p[0] / _MERGE_TOL), round(p[1] / _MERGE_TOL))
            idx = vmap.get(key)
            if idx is None:
                idx = len(verts)
                vmap[key] = idx
                verts.append(p)
            if not ring or ring[-1] != idx:
                ring.append(idx)
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring.pop()
        rings.append(ring)
    return np.array(verts), rings


def _triangular_lattice(nx, ny):
    i = np.arange(nx)
    pts = []
    for j in range(ny):
        x = (i + 0.25 + 0.5 * (j % 2)) / nx
        y = np.full(nx, (j + 0.5) / ny)
        pts.append(np.column_stack([x, y]))
    return np.vstack(pts)


def _lloyd(points, iterations):
    pts = points
    for _ in range(iterations):
        polys = _clipped_voronoi_cells(pts)
        pts = np.array([polygon_centroid(p) for p in polys])
    return pts


def _hexagonal_mesh(level):
    if level not in _HEX_LEVELS:
        raise ValueError(f"hexagonal family supports levels {sorted(_HEX_LEVELS)}, got {level}")
    nx, ny = _HEX_LEVELS[level]
    polys = _clipped_voronoi_cells(_triangular_lattice(nx, ny))
    return build_mesh(*_mesh_from_polygons(polys), check_domain_area=1.0)


def _voronoi_mesh(level, rng_seed, lloyd_iterations=100):
    if not 1 <= level <= 4:
        raise ValueError(f"voronoi family supports levels 1..4, got {level}")
    n = 64 * 4 ** (level - 1)
    rng = np.random.default_rng(rng_seed)
    seeds = rng.uniform(0.02, 0.98, size=(n, 2))
    seeds = _lloyd(seeds, lloyd_iterations)
    polys = _clipped_voronoi_cells(seeds)
    return build_mesh(*_mesh_from_polygons(polys), check_domain_area=1.0)


def _random_polygons_mesh(level, rng_seed):
    if not 1 <= level <= 6:
        raise ValueError(f"random_polygons family supports levels 1..6, got {level}")
    n = 64 * 2 ** (level - 1)
    rng = np.random.default_rng(rng_seed)
    seeds = rng.uniform(0.03, 0.97, size=(n, 2))
    polys = _clipped_voronoi_cells(seeds)
    verts, rings = _mesh_from_polygons(polys)

    base = build_mesh(verts, rings, check_domain_area=1.0)
    # split every interior edge at a randomly offset midpoint
    offsets = rng.uniform(-0.2, 0.2, size=base.n_edges)
    new_verts = list(base.vertices)
    mid_index = np.full(base.n_edges, -1, dtype=np.int64)
    for e, (a, b) in enumerate(base.edges):
        if base.boundary_edge_flags[e]:
            continue
        pa, pb = base.vertices[a], base.vertices[b]
        d = pb - pa
        normal = np.array([d[1], -d[0]])
        mid_index[e] = len(new_verts)
        new_verts.append(0.5 * (pa + pb) + offsets[e] * normal)
    new_verts = np.array(new_verts)

    def expand(ring, ce):
        out = []
        for i, v in enumerate(ring):
            out.append(v)
            m = mid_index[ce[i]]
            if m >= 0:
                out.append(m)
        return out

    new_rings = [expand(r, ce) for r, ce in zip(base.cells, base.cell_edges)]

    # damp offsets that break a centroid star-shaped fan
    for _ in range(60):
        bad = set()
        for ci, ring in enumerate(new_rings):
            poly = new_verts[ring]
            c = polygon_centroid(poly)
            d = poly - c
            cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
            if np.min(cross) <= 1e-12:
                bad.update(int(v) for v in ring if v >= base.n_vertices)
        if not bad:
            break
        for e in range(base.n_edges):
            if mid_index[e] in bad:
                a, b = base.edges[e]
                mid = 0.5 * (base.vertices[a] + base.vertices[b])
                new_verts[mid_index[e]] = 0.5 * (new_verts[mid_index[e]] + mid)
    return build_mesh(new_verts, new_rings, check_domain_area=1.0)


def _diamond_mesh(level, aspect=4):
    if not 1 <= level <= 7:
        raise ValueError(f"diamond family supports levels 1..7, got {level}")
    nx = 2 ** level
    ny = aspect * nx
    w, hh = 1.0 / nx, 1.0 / ny
    polys = []
    for i in range(2 * nx + 1):
        for j in range(2 * ny + 1):
            if (i + j) % 2 == 0:
                continue
            cx, cy = i * w / 2.0, j * hh / 2.0
            diamond = np.array([[cx - w / 2, cy], [cx, cy - hh / 2],
                                [cx + w / 2, cy], [cx, cy + hh / 2]])
            clipped = _clip_to_unit_square(diamond)
            if clipped is not None:
                polys.append(clipped)
    return build_mesh(*_mesh_from_polygons(polys), check_domain_area=1.0)


def _clip_to_unit_square(poly):
    """Sutherland-Hodgman clip of a CCW polygon against (0,1)^2."""
    def clip(pts, inside, intersect):
        out = []
        n = len(pts)
        for i in range(n):
            cur, nxt = pts[i], pts[(i + 1) % n]
            if inside(cur):
                out.append(cur)
                if not inside(nxt):
                    out.append(intersect(cur, nxt))
            elif inside(nxt):
                out.append(intersect(cur, nxt))
        return out

    def x_cut(level, keep_ge):
        def inside(p):
            return p[0] >= level if keep_ge else p[0] <= level

        def inter(a, b):
            t = (level - a[0]) / (b[0] - a[0])
            return np.array([level, a[1] + t * (b[1] - a[1])])
        return inside, inter

    def y_cut(level, keep_ge):
        def inside(p):
            return p[1] >= level if keep_ge else p[1] <= level

        def inter(a, b):
            t = (level - a[1]) / (b[1] - a[1])
            return np.array([a[0] + t * (b[0] - a[0]), level])
        return inside, inter

    pts = list(poly)
    for inside, inter in (x_cut(0.0, True), x_cut(1.0, False),
                          y_cut(0.0, True), y_cut(1.0, False)):
        pts = clip(pts, inside, inter)
        if len(pts) < 3:
            return None
    out = np.array(pts)
    if polygon_area(out) < 1e-14:
        return None
    return out


def generate_mesh(family, level, rng_seed=0):
    """Generate one of the four built-in mesh families on (0,1)^2."""
    if family == "hexagonal":
        return _hexagonal_mesh(level)
    if family == "voronoi":
        return _voronoi_mesh(level, rng_seed)
    if family == "random_polygons":
        return _random_polygons_mesh(level, rng_seed)
    if family == "diamond":
        return _diamond_mesh(level)
    raise ValueError(f"unknown mesh family {family!r}; choose from {MESH_FAMILIES}")


# ---------------------------------------------------------------------------
# JSON import/export
# ---------------------------------------------------------------------------

def export_mesh(mesh, path):
    data = {"vertices": [[float(x), float(y)] for x, y in mesh.vertices],
            "cells": [[int(v) for v in ring] for ring in mesh.cells]}
    with open(path, "w") as f:
        json.dump(data, f)


def import_mesh(path):
    try:
        with open(path) as f:
            data = json.load(f)
        vertices = data["vertices"]
        cells = data["cells"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from exc
    return build_mesh(vertices, cells)


# ---------------------------------------------------------------------------
# geometric validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryReport:
    """Per-cell shape diagnostics against the star-shapedness / edge-length thresholds."""

    star_ratio: np.ndarray       # inscribed-ball diameter / cell diameter
    min_distance_ratio: np.ndarray  # min vertex-pair distance / cell diameter
    areas: np.ndarray
    diameters: np.ndarray
    star_violations: np.ndarray
    distance_violations: np.ndarray

    @property
    def all_pass(self):
        return not (self.star_violations.any() or self.distance_violations.any())


def _point_in_polygon(points, verts):
    """Winding test for several points against one polygon (CCW)."""
    inside = np.ones(len(points), dtype=bool)
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        cross = ((b[0] - a[0]) * (points[:, 1] - a[1])
                 - (b[1] - a[1]) * (points[:, 0] - a[0]))
        inside &= cross > 0
    return inside


def _distance_to_boundary(points, verts):
    n = len(verts)
    dmin = np.full(len(points), np.inf)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        d = b - a
        t = np.clip(((points - a) @ d) / (d @ d), 0.0, 1.0)
        proj = a + t[:, None] * d[None, :]
        dist = np.linalg.norm(points - proj, axis=1)
        dmin = np.minimum(dmin, dist)
    return dmin


def _star_ratio(verts, samples=32):
    """Largest inscribed-ball diameter over diameter, ball center in the kernel.

    Kernel membership is sampled on a samples x samples grid over the
    bounding box; a center must see every edge from its inner side.
    """
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    gx = np.linspace(lo[0], hi[0], samples)
    gy = np.linspace(lo[1], hi[1], samples)
    pts = np.column_stack([np.repeat(gx, samples), np.tile(gy, samples)])
    pts = np.vstack([pts, polygon_centroid(verts)[None, :]])

    kernel = np.ones(len(pts), dtype=bool)
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        cross = ((b[0] - a[0]) * (pts[:, 1] - a[1])
                 - (b[1] - a[1]) * (pts[:, 0] - a[0]))
        kernel &= cross >= 0
    if not kernel.any():
        return 0.0
    radii = _distance_to_boundary(pts[kernel], verts)
    return float(2.0 * np.max(radii) / polygon_diameter(verts))


def validate_geometry(mesh, rho1=0.1, rho2=0.1):
    """Estimate the shape-regularity ratios of every cell.

    star_ratio reports the inscribed-ball diameter relative to the cell
    diameter (a sampled lower bound); min_distance_ratio the smallest
    vertex-pair distance relative to the cell diameter.  Violations of the
    thresholds are flagged, not fatal.
    """
    n = mesh.n_cells
    star = np.empty(n)
    mind = np.empty(n)
    for c in range(n):
        poly = mesh.cell_polygon(c)
        star[c] = _star_ratio(poly)
        d = poly[:, None, :] - poly[None, :, :]
        dist = np.sqrt(np.sum(d * d, axis=2))
        np.fill_diagonal(dist, np.inf)
        mind[c] = float(np.min(dist)) / mesh.cell_diameters[c]
    return GeometryReport(
        star_ratio=star, min_distance_ratio=mind,
        areas=mesh.cell_areas.copy(), diameters=mesh.cell_diameters.copy(),
        star_violations=star < rho1, distance_violations=mind < rho2)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


_TRIANGLE_RULES = {}


def triangle_rule(degree):
    """Rule on the reference triangle {x,y>=0, x+y<=1}, exact to degree.

    Collapsed-coordinate construction: Gauss-Jacobi(1,0) radially and
    Gauss-Legendre transversally absorb the Duffy Jacobian exactly.
    """
    if degree in _TRIANGLE_RULES:
        return _TRIANGLE_RULES[degree]
    from scipy.special import roots_jacobi, roots_legendre
    n = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(n, 1.0, 0.0)   # weight (1-u) on [-1,1]
    xl, wl = roots_legendre(n)
    u = 0.5 * (xj + 1.0)
    v = 0.5 * (xl + 1.0)
    wu = wj * 0.25                        # 1/2 interval map, 1/2 jacobi weight scale
    wv = wl * 0.5
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = (WU * WV).ravel()
    rule = (np.column_stack([x, y]), w)
    _TRIANGLE_RULES[degree] = rule
    return rule


def polygon_quadrature(verts, exactness_degree):
    """Quadrature over a polygon by fanning triangles from its centroid."""
    verts = np.asarray(verts, dtype=float)
    if exactness_degree < 0:
        raise ValueError("exactness_degree must be >= 0")
    ref_pts, ref_w = triangle_rule(exactness_degree)
    c = polygon_centroid(verts)
    pts = []
    wts = []
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        jac = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
        if jac <= 0:
            raise ValueError(
                "polygon is not star-shaped from its centroid; "
                f"fan triangle {i} has non-positive area")
        pts.append(c + ref_pts[:, 0:1] * (a - c) + ref_pts[:, 1:2] * (b - c))
        wts.append(ref_w * jac)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), exactness_degree)


_LEGENDRE_RULES = {}


def edge_quadrature(p0, p1, exactness_degree):
    """Gauss-Legendre rule along the segment p0 -> p1."""
    n = max(1, (exactness_degree + 2) // 2)
    if n not in _LEGENDRE_RULES:
        _LEGENDRE_RULES[n] = np.polynomial.legendre.leggauss(n)
    x, w = _LEGENDRE_RULES[n]
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t = 0.5 * (x + 1.0)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    return QuadratureRule(pts, 0.5 * w * length, exactness_degree)


_LOBATTO_CACHE = {}


def gauss_lobatto_points(n):
    """n Gauss-Lobatto points on [-1,1] (endpoints included), n >= 2."""
    if n in _LOBATTO_CACHE:
        return _LOBATTO_CACHE[n]
    if n < 2:
        raise ValueError("need at least 2 Lobatto points")
    if n == 2:
        pts = np.array([-1.0, 1.0])
    else:
        interior = np.polynomial.legendre.Legendre.basis(n - 1).deriv().roots()
        pts = np.concatenate([[-1.0], np.sort(interior), [1.0]])
    _LOBATTO_CACHE[n] = pts
    return pts
