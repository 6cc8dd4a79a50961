"""Triangulations of the buffer ``K1``, the exterior ``K2`` and the transition ring.

Meshes are built from a background grid clipped to the region, boundary
points obtained by uniform subdivision of each polygon edge, and a Delaunay
triangulation that is made to conform to the polygon edges by splitting any
missing constraint segment.  Axis-aligned rectangles get a purely structured
grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from scipy.spatial import Delaunay, cKDTree
from shapely.geometry import Polygon

from .exceptions import MeshingFailed, NestingViolated, NoInterfaceElements
from .geometry import point_segment_distance

TAG_DIRICHLET = "dirichlet"
TAG_GAMMA = "gamma"
TAG_INTERIOR = "interior"

_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class Triangulation:
    """Conforming triangle mesh with tagged boundary edges.

    ``boundary_tags[k]`` is one of ``"dirichlet"`` (edge on the unit square
    boundary), ``"gamma"`` (edge on the interface) or ``"interior"``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = field(default=None)
    boundary_tags: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.boundary_edges is None:
            object.__setattr__(self, "boundary_edges", _boundary_edges(t))
        if self.boundary_tags is None:
            tags = np.full(len(self.boundary_edges), TAG_INTERIOR, dtype=object)
            object.__setattr__(self, "boundary_tags", tags)
        v.setflags(write=False)
        t.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return np.abs(self.signed_areas)

    @cached_property
    def edge_lengths(self):
        p = self.vertices[self.triangles]
        return np.stack(
            [
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            ],
            axis=1,
        )

    @property
    def diameters(self):
        """Per-triangle diameter ``h_tau`` (longest edge)."""
        return self.edge_lengths.max(axis=1)

    @property
    def inradii(self):
        return 2.0 * self.areas / self.edge_lengths.sum(axis=1)

    @property
    def chunkiness(self):
        """``max_tau h_tau / (2 r_tau)`` with ``r_tau`` the inradius."""
        return float(np.max(self.diameters / (2.0 * self.inradii)))

    @property
    def min_angles(self):
        a, b, c = self.edge_lengths.T
        # angle opposite each edge via the law of cosines
        cos = np.stack(
            [
                (b**2 + c**2 - a**2) / (2 * b * c),
                (a**2 + c**2 - b**2) / (2 * a * c),
                (a**2 + b**2 - c**2) / (2 * a * b),
            ],
            axis=1,
        )
        return np.degrees(np.arccos(np.clip(cos, -1, 1))).min(axis=1)

    @property
    def h_max(self):
        return float(self.diameters.max())

    def edges_with_tag(self, tag):
        return self.boundary_edges[self.boundary_tags == tag]

    @cached_property
    def edge_to_triangle(self):
        """Map sorted vertex pair -> triangle index for boundary edges."""
        out = {}
        t = self.triangles
        for k in range(3):
            a, b = t[:, k], t[:, (k + 1) % 3]
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            for tri, (i, j) in enumerate(zip(lo.tolist(), hi.tolist())):
                out.setdefault((i, j), tri)
        return out

    def boundary_vertices(self, tag=None):
        edges = self.boundary_edges if tag is None else self.edges_with_tag(tag)
        return np.unique(edges.ravel())

    def with_tags(self, tags):
        return Triangulation(self.vertices, self.triangles, self.boundary_edges, tags)


def _boundary_edges(triangles):
    e = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    key = np.sort(e, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    # keep the orientation of the owning triangle
    return e[np.sort(idx[counts == 1])]


def merge(meshes):
    """Disjoint union of triangulations (vertex indices offset)."""
    verts, tris, bedges, tags = [], [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        bedges.append(m.boundary_edges + offset)
        tags.append(m.boundary_tags)
        offset += m.n_vertices
    return Triangulation(
        np.vstack(verts),
        np.vstack(tris),
        np.vstack(bedges),
        np.concatenate(tags),
    )


def tag_boundary(mesh: Triangulation, gamma_segments=None, tol=_GEOM_TOL):
    """Tag boundary edges lying on the unit square boundary or on ``Gamma``."""
    v = mesh.vertices
    e = mesh.boundary_edges
    a, b = v[e[:, 0]], v[e[:, 1]]
    tags = np.full(len(e), TAG_INTERIOR, dtype=object)
    on_dd = np.zeros(len(e), dtype=bool)
    for axis in (0, 1):
        for side in (0.0, 1.0):
            on_dd |= (np.abs(a[:, axis] - side) < tol) & (np.abs(b[:, axis] - side) < tol)
    tags[on_dd] = TAG_DIRICHLET
    if gamma_segments is not None:
        starts, ends = gamma_segments[0], gamma_segments[1]
        on_g = np.zeros(len(e), dtype=bool)
        for s, t in zip(starts, ends):
            on_g |= (point_segment_distance(a, s, t) < tol) & (
                point_segment_distance(b, s, t) < tol
            )
        tags[on_g & ~on_dd] = TAG_GAMMA
    return mesh.with_tags(tags)


def structured_rectangle(x0, x1, y0, y1, nx, ny):
    """Uniform grid of ``nx * ny`` cells, each split along its ``/`` diagonal."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    tris = np.vstack(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return Triangulation(verts, tris)


def uniform_unit_square(n):
    """``n x n`` structured mesh of the unit square with tagged boundary."""
    return tag_boundary(structured_rectangle(0.0, 1.0, 0.0, 1.0, n, n))


def _is_axis_rectangle(poly):
    if len(poly) != 4:
        return False
    d = np.roll(poly, -1, axis=0) - poly
    return bool(np.all((np.abs(d[:, 0]) < _GEOM_TOL) | (np.abs(d[:, 1]) < _GEOM_TOL)))


def _subdivide_ring(poly, target):
    """Points along a closed polygon with every piece no longer than ``target``."""
    pts = []
    for p, q in zip(poly, np.roll(poly, -1, axis=0)):
        n = 1 if target is None else max(1, int(np.ceil(np.linalg.norm(q - p) / target - 1e-9)))
        s = np.arange(n)[:, None] / n
        pts.append(p + s * (q - p))
    return np.vstack(pts)


def _ring_segments(offset, n):
    idx = np.arange(n) + offset
    return np.column_stack([idx, np.roll(idx, -1)])


def _delaunay_edges(tri):
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return set(map(tuple, e.tolist()))


def _conforming_delaunay(points, segments, region, max_splits=20):
    """Delaunay triangulation restricted to ``region`` containing every segment.

    Missing constraint segments are split at their midpoint until present.
    Returns ``(points, triangles, segments)``.
    """
    points = np.asarray(points, dtype=float)
    segments = np.asarray(segments, dtype=np.int64)
    for _ in range(max_splits):
        tri = Delaunay(points, qhull_options="Qbb Qc Qz Q12").simplices
        present = _delaunay_edges(tri)
        key = np.sort(segments, axis=1)
        missing = np.array([tuple(k) not in present for k in key.tolist()])
        if not missing.any():
            break
        new_pts = 0.5 * (points[segments[missing, 0]] + points[segments[missing, 1]])
        new_idx = np.arange(len(new_pts)) + len(points)
        points = np.vstack([points, new_pts])
        keep = segments[~missing]
        split = segments[missing]
        segments = np.vstack(
            [keep, np.column_stack([split[:, 0], new_idx]), np.column_stack([new_idx, split[:, 1]])]
        )
    else:
        raise MeshingFailed("could not recover the boundary segments")
    c = points[tri].mean(axis=1)
    inside = shapely.contains_xy(region, c[:, 0], c[:, 1])
    tri = tri[inside]
    # orient counterclockwise
    p = points[tri]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    tri[sa < 0] = tri[sa < 0][:, [0, 2, 1]]
    tri = tri[np.abs(sa) > 2e-14]
    return points, tri, segments


def _compact(points, tri):
    used = np.unique(tri)
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return points[used], remap[tri]


def triangulate_region(
    outer,
    holes=(),
    target=0.1,
    *,
    structured=True,
    min_angle=15.0,
    max_refine=12,
    gamma_segments=None,
):
    """Triangulate a polygon (optionally with holes) at mesh size ``target``.

    Boundary edges are subdivided into pieces of length at most ``target``;
    the interior is seeded from a global grid of spacing ``target``.
    Triangles with diameter above ``1.5 * target`` or minimum angle below
    ``min_angle`` degrees receive an extra vertex and the triangulation is
    rebuilt, at most ``max_refine`` times.
    """
    outer = np.asarray(outer, dtype=float)
    holes = [np.asarray(h, dtype=float) for h in holes]
    region = Polygon(outer, holes)
    if not region.is_valid or region.area <= 0:
        raise MeshingFailed("region polygon is self-intersecting or empty")
    if target <= 0:
        raise MeshingFailed("target mesh size must be positive")
    shapely.prepare(region)

    if structured and not holes and _is_axis_rectangle(outer):
        x0, y0 = outer.min(axis=0)
        x1, y1 = outer.max(axis=0)
        nx = max(1, int(np.ceil((x1 - x0) / target - 1e-9)))
        ny = max(1, int(np.ceil((y1 - y0) / target - 1e-9)))
        mesh = structured_rectangle(x0, x1, y0, y1, nx, ny)
        return tag_boundary(mesh, gamma_segments)

    rings = [outer] + holes
    bpts, segs = [], []
    offset = 0
    for r in rings:
        p = _subdivide_ring(r, target)
        bpts.append(p)
        segs.append(_ring_segments(offset, len(p)))
        offset += len(p)
    bpts = np.vstack(bpts)
    segs = np.vstack(segs)

    x0, y0 = outer.min(axis=0)
    x1, y1 = outer.max(axis=0)
    gx = np.arange(np.floor(x0 / target), np.ceil(x1 / target) + 1) * target
    gy = np.arange(np.floor(y0 / target), np.ceil(y1 / target) + 1) * target
    GX, GY = np.meshgrid(gx, gy)
    grid = np.column_stack([GX.ravel(), GY.ravel()])
    inside = shapely.contains_xy(region, grid[:, 0], grid[:, 1])
    grid = grid[inside]
    dist = shapely.distance(shapely.points(grid), region.boundary)
    grid = grid[dist >= 0.5 * target]

    points = np.vstack([bpts, grid])
    for _ in range(max_refine + 1):
        points, tri, segs = _conforming_delaunay(points, segs, region)
        mesh = Triangulation(points, tri)
        bad = (mesh.diameters > 1.5 * target) | (mesh.min_angles < min_angle)
        if not bad.any():
            break
        cand = _insertion_points(mesh, bad, region, target)
        if len(cand) == 0:
            break
        points = np.vstack([points, cand])
    points, tri = _compact(points, tri)
    mesh = Triangulation(points, tri)
    return tag_boundary(mesh, gamma_segments)


def _insertion_points(mesh, bad, region, target):
    """Circumcenters of bad triangles (centroid if the circumcenter is unusable)."""
    p = mesh.vertices[mesh.triangles[bad]]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    d = 2 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1]) + c[:, 0] * (a[:, 1] - b[:, 1]))
    sa, sb, sc = (a**2).sum(1), (b**2).sum(1), (c**2).sum(1)
    ux = (sa * (b[:, 1] - c[:, 1]) + sb * (c[:, 1] - a[:, 1]) + sc * (a[:, 1] - b[:, 1])) / d
    uy = (sa * (c[:, 0] - b[:, 0]) + sb * (a[:, 0] - c[:, 0]) + sc * (b[:, 0] - a[:, 0])) / d
    cc = np.column_stack([ux, uy])
    centroid = p.mean(axis=1)
    ok = shapely.contains_xy(region, cc[:, 0], cc[:, 1])
    ok[ok] = shapely.distance(shapely.points(cc[ok]), region.boundary) > 0.3 * target
    cand = np.where(ok[:, None], cc, centroid)
    tree = cKDTree(mesh.vertices)
    dist, _ = tree.query(cand)
    cand = cand[dist > 0.25 * target]
    if len(cand) == 0:
        return cand
    # drop near-duplicates among the candidates themselves
    keep = []
    ctree = cKDTree(cand)
    taken = np.zeros(len(cand), dtype=bool)
    for i in range(len(cand)):
        if taken[i]:
            continue
        keep.append(i)
        for j in ctree.query_ball_point(cand[i], 0.25 * target):
            taken[j] = True
    return cand[keep]


def build_one_layer_ring(inner_polygons, outer_polygon, max_segment=None):
    """Triangulate ``outer \\ union(inner)`` using boundary vertices only.

    With ``max_segment`` the polygon edges are first subdivided so no boundary
    piece is longer than that; the result never has interior vertices.
    """
    outer = np.asarray(outer_polygon, dtype=float)
    inners = [np.asarray(p, dtype=float) for p in inner_polygons]
    outer_geom = Polygon(outer)
    for p in inners:
        g = Polygon(p)
        if not outer_geom.contains(g) or g.boundary.distance(outer_geom.boundary) <= 0:
            raise NestingViolated("inner polygon is not strictly inside the outer polygon")
    region = Polygon(outer, [p[::-1] for p in inners])
    if not region.is_valid:
        raise NestingViolated("inner polygons overlap")
    rings = [outer] + inners
    pts, segs = [], []
    offset = 0
    for r in rings:
        p = _subdivide_ring(r, max_segment)
        pts.append(p)
        segs.append(_ring_segments(offset, len(p)))
        offset += len(p)
    points, tri, _ = _conforming_delaunay(np.vstack(pts), np.vstack(segs), region)
    points, tri = _compact(points, tri)
    return Triangulation(points, tri)


@dataclass(frozen=True)
class MeshPair:
    inner: Triangulation
    outer: Triangulation
    ring: Triangulation
    h: float
    H: float

    @property
    def sigma(self):
        return max(self.inner.chunkiness, self.outer.chunkiness)


def build_mesh_pair(partition, h, H, ring_max_segment=None, min_angle=15.0):
    """Independent meshes of ``K1`` (size ``h``) and ``K2`` (size ``H``) plus the ring."""
    gseg = partition.gamma_segments()
    inner = merge(
        [
            triangulate_region(p, (), h, gamma_segments=gseg, min_angle=min_angle)
            for p in partition.k1
        ]
    )
    outer_poly, holes = partition.k2_polygon
    outer = triangulate_region(
        outer_poly, holes, H, gamma_segments=gseg, min_angle=min_angle
    )
    rings = []
    for k1 in partition.k1:
        g = Polygon(k1)
        inside = [p for p in partition.k0 if g.contains(Polygon(p))]
        rings.append(build_one_layer_ring(inside, k1, ring_max_segment))
    return MeshPair(inner=inner, outer=outer, ring=merge(rings), h=h, H=H)


def check_assumption_A(inner: Triangulation, threshold=0.5):
    """Quasi-uniformity of the fine elements touching ``Gamma``.

    Returns ``(is_quasi_uniform, nu, h_gamma)`` with ``h_gamma`` the largest
    diameter among triangles with a vertex on ``Gamma`` and ``nu`` the ratio of
    the smallest such diameter to ``h_gamma``.
    """
    gv = inner.boundary_vertices(TAG_GAMMA)
    if len(gv) == 0:
        raise NoInterfaceElements("mesh has no vertex on the interface")
    on_gamma = np.zeros(inner.n_vertices, dtype=bool)
    on_gamma[gv] = True
    touching = on_gamma[inner.triangles].any(axis=1)
    diam = inner.diameters[touching]
    h_gamma = float(diam.max())
    nu = float(diam.min() / h_gamma)
    return nu >= threshold, nu, h_gamma


def write_mesh_text(path, mesh: Triangulation):
    """Plain-text mesh: ``VERTICES n`` block then ``TRIANGLES m`` block."""
    with open(path, "w") as fh:
        fh.write(f"VERTICES {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"TRIANGLES {mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


def read_mesh_text(path) -> Triangulation:
    with open(path) as fh:
        lines = fh.read().split("\n")
    head, nv = lines[0].split()
    if head != "VERTICES":
        raise ValueError("missing VERTICES header")
    nv = int(nv)
    verts = np.array([list(map(float, ln.split())) for ln in lines[1 : 1 + nv]])
    head, nt = lines[1 + nv].split()
    if head != "TRIANGLES":
        raise ValueError("missing TRIANGLES header")
    nt = int(nt)
    tris = np.array(
        [list(map(int, ln.split())) for ln in lines[2 + nv : 2 + nv + nt]], dtype=np.int64
    )
    return Triangulation(verts.reshape(-1, 2), tris.reshape(-1, 3))
