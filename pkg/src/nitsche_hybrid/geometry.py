"""Defect geometry on the unit square.

The domain is ``D = (0, 1)^2``.  A defect ``K0`` is enlarged by a buffer of
width ``delta`` into ``K1``; ``K2 = D \\ K1`` is the exterior and the numerical
interface ``Gamma`` is the boundary of ``K1`` (which never touches ``dD``).
Every boundary is kept piecewise linear so that meshing and interface
intersection only ever deal with straight segments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Polygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from .exceptions import BufferEscapesDomain, DegenerateShape

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# region codes returned by RegionPartition.classify
K0, RING, K2, OUTSIDE = 0, 1, 2, -1


@dataclass(frozen=True)
class Well:
    """Square defect ``center + (-L, L)^2``."""

    center: tuple = (0.5, 0.5)
    L: float = 0.05


@dataclass(frozen=True)
class Channel:
    """Channel of width ``width`` following a polyline spine (flat ends)."""

    spine: tuple = ((0.3, 0.7), (0.7, 0.7), (0.7, 0.3))
    width: float = 0.05


@dataclass(frozen=True)
class EllipseSpec:
    center: tuple
    a: float
    b: float
    rotation: float = 0.0


@dataclass(frozen=True)
class Ellipse:
    """One or more ellipses; each gets its own rectangular buffer."""

    ellipses: tuple = (
        EllipseSpec((0.5, 0.35), 0.25, 0.01),
        EllipseSpec((0.5, 0.65), 0.25, 0.01),
    )


DefectShape = Union[Well, Channel, Ellipse]


def polygon_area(poly):
    """Signed shoelace area (positive for counterclockwise vertex order)."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygonize_ellipse(center, a, b, rotation=0.0, n_segments=128, min_segments=8):
    """Inscribed polygon with ``n_segments`` vertices on the ellipse.

    The first vertex sits at the end of the major axis, so for ``n_segments``
    divisible by four the four axis extremes are vertices.
    """
    if n_segments < min_segments:
        raise DegenerateShape(
            f"n_segments={n_segments} too small (minimum {min_segments})"
        )
    if not (a >= b > 0):
        raise DegenerateShape(f"need a >= b > 0, got a={a}, b={b}")
    t = 2.0 * np.pi * np.arange(n_segments) / n_segments
    local = np.column_stack([a * np.cos(t), b * np.sin(t)])
    c, s = np.cos(rotation), np.sin(rotation)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(center, dtype=float)


def _ring_array(poly: Polygon):
    poly = orient(poly, sign=1.0)
    return np.asarray(poly.exterior.coords)[:-1].copy()


def _components(geom):
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [geom]


@dataclass(frozen=True)
class RegionPartition:
    """Defect ``K0``, buffer ``K1`` and the interface ``Gamma``.

    Polygons are stored as ``(n, 2)`` counterclockwise vertex arrays without a
    repeated closing vertex.  ``gamma`` holds the closed polylines that make up
    ``Gamma`` (one per component of ``K1``).
    """

    k0: tuple
    k1: tuple
    d: float
    shape: object = None
    delta: float = 0.0
    _k0_geom: object = field(default=None, repr=False, compare=False)
    _k1_geom: object = field(default=None, repr=False, compare=False)

    @property
    def gamma(self):
        return self.k1

    @property
    def k0_geometry(self):
        return self._k0_geom

    @property
    def k1_geometry(self):
        return self._k1_geom

    @property
    def k2_geometry(self):
        return Polygon(UNIT_SQUARE).difference(self._k1_geom)

    @property
    def k2_polygon(self):
        """Outer boundary and holes of ``K2`` as vertex arrays."""
        return UNIT_SQUARE.copy(), tuple(p[::-1].copy() for p in self.k1)

    @property
    def area_k0(self):
        return float(self._k0_geom.area)

    @property
    def area_k1(self):
        return float(self._k1_geom.area)

    @property
    def area_k2(self):
        return 1.0 - self.area_k1

    @property
    def gamma_length(self):
        return float(sum(Polygon(p).length for p in self.k1))

    def gamma_segments(self):
        """All straight pieces of ``Gamma``.

        Returns
        -------
        start, end : (S, 2) arrays
        normal : (S, 2) array
            Unit normals pointing from ``K1`` into ``K2``.
        """
        starts, ends = [], []
        for p in self.k1:
            starts.append(p)
            ends.append(np.roll(p, -1, axis=0))
        start = np.vstack(starts)
        end = np.vstack(ends)
        t = end - start
        length = np.hypot(t[:, 0], t[:, 1])
        # K1 polygons are counterclockwise, so the outward normal is t rotated by -90 deg
        normal = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
        return start, end, normal

    def classify(self, points):
        """Region code per point: 0 = K0, 1 = K1 \\ K0, 2 = K2, -1 = outside D.

        Closed sets are used, so ties go to the lower index: points on the
        boundary of ``K0`` count as ``K0`` and points on ``Gamma`` as ``K1``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        code = np.full(len(pts), K2, dtype=int)
        inside_d = (x >= 0) & (x <= 1) & (y >= 0) & (y <= 1)
        code[~inside_d] = OUTSIDE
        x0, y0, x1, y1 = self._k1_geom.bounds
        near = np.flatnonzero((x >= x0) & (x <= x1) & (y >= y0) & (y <= y1))
        xn, yn = x[near], y[near]
        in_k1 = shapely.intersects_xy(self._k1_geom, xn, yn)
        code[near[in_k1]] = RING
        cand = near[in_k1]
        in_k0 = shapely.intersects_xy(self._k0_geom, x[cand], y[cand])
        code[cand[in_k0]] = K0
        return code


def _as_partition(k0_geom, k1_geom, shape, delta):
    minx, miny, maxx, maxy = k1_geom.bounds
    if minx <= 0 or miny <= 0 or maxx >= 1 or maxy >= 1:
        raise BufferEscapesDomain(
            f"buffer region bounds {k1_geom.bounds} leave the unit square"
        )
    if not k1_geom.contains(k0_geom):
        raise DegenerateShape("defect is not contained in its buffer")
    k0 = tuple(_ring_array(p) for p in _components(k0_geom))
    k1 = tuple(_ring_array(p) for p in _components(k1_geom))
    d = float(k0_geom.distance(k1_geom.boundary))
    if d <= 0:
        raise DegenerateShape("defect touches the interface")
    shapely.prepare(k0_geom)
    shapely.prepare(k1_geom)
    return RegionPartition(
        k0=k0, k1=k1, d=d, shape=shape, delta=delta, _k0_geom=k0_geom, _k1_geom=k1_geom
    )


def _rectangle(center, half_x, half_y, rotation=0.0):
    local = np.array(
        [[-half_x, -half_y], [half_x, -half_y], [half_x, half_y], [-half_x, half_y]]
    )
    c, s = np.cos(rotation), np.sin(rotation)
    return local @ np.array([[c, -s], [s, c]]).T + np.asarray(center, dtype=float)


def build_partition(shape: DefectShape, delta: float, n_segments: int = 128):
    """Enlarge the defect by ``delta`` and return the region partition.

    * Well: ``K1`` is the concentric square of half-width ``L + delta``.
    * Channel: ``K0`` is the spine thickened to ``width`` with mitred joints and
      flat ends; ``K1`` is its mitred offset by ``delta`` (the set within
      max-norm distance ``delta`` for rectilinear channels).
    * Ellipse: ``K0`` is the polygonized ellipse, ``K1`` its bounding rectangle
      enlarged by ``delta`` on every side.
    """
    if delta <= 0:
        raise DegenerateShape(f"buffer width must be positive, got {delta}")
    if isinstance(shape, Well):
        if shape.L <= 0:
            raise DegenerateShape(f"well half-width must be positive, got {shape.L}")
        k0 = Polygon(_rectangle(shape.center, shape.L, shape.L))
        k1 = Polygon(_rectangle(shape.center, shape.L + delta, shape.L + delta))
    elif isinstance(shape, Channel):
        if shape.width <= 0:
            raise DegenerateShape(f"channel width must be positive, got {shape.width}")
        if len(shape.spine) < 2:
            raise DegenerateShape("channel spine needs at least two points")
        line = LineString(shape.spine)
        k0 = line.buffer(shape.width / 2, cap_style="flat", join_style="mitre")
        k1 = k0.buffer(delta, join_style="mitre")
        if not isinstance(k0, Polygon) or not k0.is_valid or len(k0.interiors):
            raise DegenerateShape("channel spine produces an invalid region")
    elif isinstance(shape, Ellipse):
        if not shape.ellipses:
            raise DegenerateShape("no ellipses given")
        k0_parts, k1_parts = [], []
        for e in shape.ellipses:
            k0_parts.append(
                Polygon(polygonize_ellipse(e.center, e.a, e.b, e.rotation, n_segments))
            )
            k1_parts.append(
                Polygon(_rectangle(e.center, e.a + delta, e.b + delta, e.rotation))
            )
        for i in range(len(k1_parts)):
            for j in range(i + 1, len(k1_parts)):
                if k1_parts[i].intersects(k1_parts[j]):
                    raise DegenerateShape("ellipse buffers overlap")
        k0 = unary_union(k0_parts)
        k1 = unary_union(k1_parts)
    else:
        raise TypeError(f"unknown defect shape {shape!r}")
    return _as_partition(k0, k1, shape, delta)


def point_segment_distance(points, a, b):
    """Distance from each point to the segment ``[a, b]``."""
    p = np.atleast_2d(points)
    ab = np.asarray(b, float) - np.asarray(a, float)
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    proj = np.asarray(a, float) + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def write_polygon(path, poly):
    """Write vertices as ``x y`` lines (closed implicitly)."""
    np.savetxt(path, np.asarray(poly, dtype=float), fmt="%.17g")


def read_polygon(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, dtype=float))


def default_shape(name: str) -> DefectShape:
    """Defect shapes used in the numerical experiments."""
    if name == "well":
        return Well((0.5, 0.5), 0.05)
    if name == "channel":
        return Channel()
    if name == "ellipse":
        return Ellipse()
    raise ValueError(f"unknown defect {name!r}")


DEFAULT_DELTA = {"well": 0.05, "channel": 0.025, "ellipse": 0.02}
