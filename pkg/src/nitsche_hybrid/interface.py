"""Interface meshes on ``Gamma``: fine/coarse edges and their intersections."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import CoverageGap, UntaggedBoundary
from .geometry import point_segment_distance
from .mesh import TAG_GAMMA, Triangulation

_ON_SEGMENT_TOL = 1e-12


@dataclass(frozen=True)
class GammaSegments:
    """Straight pieces of ``Gamma`` with unit normals pointing from K1 to K2."""

    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray

    @classmethod
    def from_partition(cls, partition):
        return cls(*partition.gamma_segments())

    @property
    def length(self):
        return np.linalg.norm(self.end - self.start, axis=1)

    @property
    def tangent(self):
        return (self.end - self.start) / self.length[:, None]

    @property
    def total_length(self):
        return float(self.length.sum())

    def locate_edges(self, a, b, tol=_ON_SEGMENT_TOL):
        """Index of the segment holding each edge ``[a_k, b_k]`` (-1 if none)."""
        seg = np.full(len(a), -1, dtype=np.int64)
        for k, (s, e) in enumerate(zip(self.start, self.end)):
            on = (point_segment_distance(a, s, e) < tol) & (point_segment_distance(b, s, e) < tol)
            seg[(seg < 0) & on] = k
        return seg


@dataclass(frozen=True)
class GammaEdges:
    """Mesh edges on ``Gamma`` parametrized by arclength along their segment."""

    segments: GammaSegments
    segment: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    triangle: np.ndarray
    diameter: np.ndarray

    def __len__(self):
        return len(self.segment)

    @property
    def lengths(self):
        return self.s1 - self.s0


def collect_gamma_edges(mesh: Triangulation, segments) -> GammaEdges:
    """All boundary edges of ``mesh`` on ``Gamma`` with their adjacent triangle."""
    if not isinstance(segments, GammaSegments):
        segments = GammaSegments.from_partition(segments)
    v = mesh.vertices
    tagged = mesh.boundary_tags == TAG_GAMMA
    untagged = mesh.boundary_edges[~tagged]
    if len(untagged):
        loc = segments.locate_edges(v[untagged[:, 0]], v[untagged[:, 1]])
        if np.any(loc >= 0):
            raise UntaggedBoundary("mesh has edges on Gamma without the gamma tag")
    edges = mesh.boundary_edges[tagged]
    a, b = v[edges[:, 0]], v[edges[:, 1]]
    seg = segments.locate_edges(a, b)
    if np.any(seg < 0):
        raise UntaggedBoundary("gamma-tagged edge does not lie on any interface segment")
    t = segments.tangent[seg]
    st = segments.start[seg]
    sa = np.einsum("nd,nd->n", a - st, t)
    sb = np.einsum("nd,nd->n", b - st, t)
    e2t = mesh.edge_to_triangle
    tri = np.array(
        [e2t[(min(i, j), max(i, j))] for i, j in edges.tolist()], dtype=np.int64
    )
    return GammaEdges(
        segments=segments,
        segment=seg,
        s0=np.minimum(sa, sb),
        s1=np.maximum(sa, sb),
        triangle=tri,
        diameter=mesh.diameters[tri],
    )


class InterfaceEdge(NamedTuple):
    p0: np.ndarray
    p1: np.ndarray
    fine_triangle: int
    coarse_triangle: int
    h_e: float
    H_e: float
    omega1: float
    omega2: float
    normal: np.ndarray


@dataclass(frozen=True)
class InterfaceMesh:
    """Intersections ``e & E`` of fine and coarse interface edges (arrays of length m)."""

    p0: np.ndarray
    p1: np.ndarray
    fine_triangle: np.ndarray
    coarse_triangle: np.ndarray
    h_e: np.ndarray
    H_e: np.ndarray
    normal: np.ndarray
    segment: np.ndarray
    fine_edge_length: np.ndarray

    def __len__(self):
        return len(self.h_e)

    def __iter__(self):
        for k in range(len(self)):
            yield InterfaceEdge(
                self.p0[k],
                self.p1[k],
                int(self.fine_triangle[k]),
                int(self.coarse_triangle[k]),
                float(self.h_e[k]),
                float(self.H_e[k]),
                float(self.omega1[k]),
                float(self.omega2[k]),
                self.normal[k],
            )

    @property
    def omega1(self):
        return self.h_e / (self.h_e + self.H_e)

    @property
    def omega2(self):
        return self.H_e / (self.h_e + self.H_e)

    @property
    def lengths(self):
        return np.linalg.norm(self.p1 - self.p0, axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "y0", "x1", "y1", "h_e", "H_e", "omega1"])
            for k in range(len(self)):
                w.writerow(
                    [
                        repr(float(self.p0[k, 0])),
                        repr(float(self.p0[k, 1])),
                        repr(float(self.p1[k, 0])),
                        repr(float(self.p1[k, 1])),
                        repr(float(self.h_e[k])),
                        repr(float(self.H_e[k])),
                        repr(float(self.omega1[k])),
                    ]
                )


def _owner(s0, s1, mid):
    """Index of the interval ``[s0, s1]`` containing each midpoint (-1 if none)."""
    order = np.argsort(s0, kind="stable")
    k = np.searchsorted(s0[order], mid, side="right") - 1
    k = np.clip(k, 0, len(order) - 1)
    idx = order[k]
    ok = (s0[idx] <= mid) & (mid <= s1[idx])
    return np.where(ok, idx, -1)


def intersect_interfaces(fine: GammaEdges, coarse: GammaEdges, gap_tol=1e-10) -> InterfaceMesh:
    """Common refinement of the fine and coarse interface meshes.

    Works segment by segment in the arclength parameter: all edge endpoints
    are merged into breakpoints and every piece between consecutive
    breakpoints is assigned to the fine and the coarse edge containing it.
    """
    segs = fine.segments
    total = segs.total_length
    drop = 1e-12 * total
    parts = {k: [] for k in ("p0", "p1", "ft", "ct", "h", "H", "n", "seg", "flen")}
    for k in range(len(segs.start)):
        fm = fine.segment == k
        cm = coarse.segment == k
        seg_len = segs.length[k]
        if not fm.any() and not cm.any():
            raise CoverageGap(f"interface segment {k} has no mesh edges")
        fs0, fs1 = fine.s0[fm], fine.s1[fm]
        cs0, cs1 = coarse.s0[cm], coarse.s1[cm]
        for lo, hi, name in ((fs0, fs1, "fine"), (cs0, cs1, "coarse")):
            covered = (hi - lo).sum()
            if abs(covered - seg_len) > gap_tol or lo.min(initial=np.inf) > gap_tol:
                raise CoverageGap(
                    f"{name} edges cover {covered:.15g} of segment {k} (length {seg_len:.15g})"
                )
        br = np.sort(np.concatenate([fs0, fs1, cs0, cs1]))
        keep = np.ones(len(br), dtype=bool)
        keep[1:] = np.diff(br) > drop
        br = br[keep]
        a, b = br[:-1], br[1:]
        mid = 0.5 * (a + b)
        fi = _owner(fs0, fs1, mid)
        ci = _owner(cs0, cs1, mid)
        if np.any(fi < 0) or np.any(ci < 0):
            raise CoverageGap(f"interface segment {k} is not covered by both meshes")
        fidx = np.flatnonzero(fm)[fi]
        cidx = np.flatnonzero(cm)[ci]
        st, t = segs.start[k], segs.tangent[k]
        parts["p0"].append(st + a[:, None] * t)
        parts["p1"].append(st + b[:, None] * t)
        parts["ft"].append(fine.triangle[fidx])
        parts["ct"].append(coarse.triangle[cidx])
        parts["h"].append(fine.diameter[fidx])
        parts["H"].append(coarse.diameter[cidx])
        parts["n"].append(np.broadcast_to(segs.normal[k], (len(a), 2)))
        parts["seg"].append(np.full(len(a), k))
        parts["flen"].append(fine.lengths[fidx])
    cat = {k: np.concatenate(v) if v else np.zeros(0) for k, v in parts.items()}
    out = InterfaceMesh(
        p0=cat["p0"].reshape(-1, 2),
        p1=cat["p1"].reshape(-1, 2),
        fine_triangle=cat["ft"].astype(np.int64),
        coarse_triangle=cat["ct"].astype(np.int64),
        h_e=cat["h"],
        H_e=cat["H"],
        normal=cat["n"].reshape(-1, 2),
        segment=cat["seg"].astype(np.int64),
        fine_edge_length=cat["flen"],
    )
    if abs(out.lengths.sum() - total) > gap_tol * max(1.0, total):
        raise CoverageGap("interface pieces do not add up to the length of Gamma")
    return out


def build_interface(inner: Triangulation, outer: Triangulation, partition) -> InterfaceMesh:
    segs = GammaSegments.from_partition(partition)
    return intersect_interfaces(collect_gamma_edges(inner, segs), collect_gamma_edges(outer, segs))


def check_assumption_B(interface: InterfaceMesh, tol=1e-10):
    """True when every intersection is a whole fine edge (fine edges nest in coarse ones)."""
    if len(interface) == 0:
        return True
    return bool(np.all(np.abs(interface.lengths - interface.fine_edge_length) <= tol))


def weighted_average_and_jump(v1, v2, omega1, omega2):
    """Return ``({v}_w, {v}^w, [v])`` for the two one-sided traces."""
    lower = omega1 * v1 + omega2 * v2
    upper = omega2 * v1 + omega1 * v2
    return lower, upper, v1 - v2
