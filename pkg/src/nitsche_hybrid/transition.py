"""Transition functions: 1 on the defect, 0 outside the buffer."""
from __future__ import annotations

import numpy as np

from .exceptions import RingVertexOffBoundary
from .geometry import K0, RING, RegionPartition, point_segment_distance
from .locate import TriangleLocator
from .mesh import Triangulation

_ON_BOUNDARY_TOL = 1e-12
_SNAP = 1e-13


def _on_polygon(points, poly, tol):
    d = np.full(len(points), np.inf)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        d = np.minimum(d, point_segment_distance(points, a, b))
    return d < tol


class C0RingTransition:
    """Piecewise-linear interpolant on the one-layer ring mesh.

    Ring vertices on the defect boundary carry 1, those on ``Gamma`` carry 0.
    ``flat_triangles`` lists ring triangles whose three vertices lie on the
    same boundary (there the function is constant).
    """

    kind = "c0"

    def __init__(self, partition: RegionPartition, ring: Triangulation):
        self.partition = partition
        self.ring = ring
        v = ring.vertices
        on_inner = np.zeros(len(v), dtype=bool)
        for p in partition.k0:
            on_inner |= _on_polygon(v, p, _ON_BOUNDARY_TOL)
        on_outer = np.zeros(len(v), dtype=bool)
        for p in partition.k1:
            on_outer |= _on_polygon(v, p, _ON_BOUNDARY_TOL)
        if not np.all(on_inner | on_outer):
            raise RingVertexOffBoundary("ring has a vertex on neither boundary")
        self.nodal = on_inner.astype(float)
        vals = self.nodal[ring.triangles]
        self.flat_triangles = np.flatnonzero(np.all(vals == vals[:, :1], axis=1))
        self._locator = TriangleLocator(v, ring.triangles)

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        code = self.partition.classify(pts)
        out = np.zeros(len(pts))
        out[code == K0] = 1.0
        ring = np.flatnonzero(code == RING)
        if len(ring):
            tri, lam = self._locator.locate(pts[ring], tol=1e-9)
            found = tri >= 0
            vals = np.einsum("ni,ni->n", self.nodal[self.ring.triangles[tri[found]]], lam[found])
            # barycentric round-off must not leave rho = 1e-16 on Gamma
            vals[vals < _SNAP] = 0.0
            vals[vals > 1.0 - _SNAP] = 1.0
            out[ring[found]] = np.clip(vals, 0.0, 1.0)
            # points a rounding error outside the ring lie on one of its boundaries
            if not found.all():
                miss = ring[~found]
                near_k0 = np.zeros(len(miss), dtype=bool)
                for p in self.partition.k0:
                    near_k0 |= _on_polygon(pts[miss], p, 1e-9)
                out[miss] = near_k0.astype(float)
        return out


def cosine_step(t, L, delta):
    """1 on ``|t| < L``, cosine ramp down to 0 at ``|t| = L + delta``."""
    at = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(at)
    out[at < L] = 1.0
    ramp = (at >= L) & (at <= L + delta)
    out[ramp] = 0.5 * np.cos(np.pi * (at[ramp] - L) / delta) + 0.5
    return out


class C1WellTransition:
    """Tensor product of cosine ramps for the square defect (C^1 smooth)."""

    kind = "c1"

    def __init__(self, center, L, delta):
        if L <= 0 or delta <= 0:
            raise ValueError("L and delta must be positive")
        self.center = np.asarray(center, dtype=float)
        self.L = float(L)
        self.delta = float(delta)

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = pts - self.center
        return cosine_step(t[:, 0], self.L, self.delta) * cosine_step(t[:, 1], self.L, self.delta)


def build_c0_transition(partition, ring):
    return C0RingTransition(partition, ring)


def build_c1_well_transition(center, L, delta):
    return C1WellTransition(center, L, delta)
