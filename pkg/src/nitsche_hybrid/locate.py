"""Vectorized point location in a triangulation via a uniform bin grid."""
from __future__ import annotations

import numpy as np


class TriangleLocator:
    """Find the triangle containing each query point.

    Every triangle is registered in all bins its bounding box overlaps; a
    query only tests the triangles of its own bin.  Among candidate triangles
    the one where the point is deepest (largest minimum barycentric
    coordinate) wins, which makes ties on shared edges deterministic.
    """

    def __init__(self, vertices, triangles, bins_per_axis=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        p = self.vertices[self.triangles]
        lo = p.min(axis=1)
        hi = p.max(axis=1)
        self.origin = lo.min(axis=0)
        extent = np.maximum(hi.max(axis=0) - self.origin, 1e-300)
        if bins_per_axis is None:
            bins_per_axis = int(np.clip(np.sqrt(len(self.triangles) / 2.0), 1, 2048))
        self.nb = bins_per_axis
        self.cell = extent / bins_per_axis
        pad = 1e-12 * extent
        b0 = self._bin_xy(lo - pad)
        b1 = self._bin_xy(hi + pad)
        nx = b1[:, 0] - b0[:, 0] + 1
        ny = b1[:, 1] - b0[:, 1] + 1
        counts = nx * ny
        tri_ids = np.repeat(np.arange(len(self.triangles)), counts)
        start = np.repeat(np.cumsum(counts) - counts, counts)
        local = np.arange(counts.sum()) - start
        ix = b0[tri_ids, 0] + local % nx[tri_ids]
        iy = b0[tri_ids, 1] + local // nx[tri_ids]
        bin_id = iy * self.nb + ix
        order = np.argsort(bin_id, kind="stable")
        self._bin_tris = tri_ids[order]
        self._bin_ptr = np.searchsorted(bin_id[order], np.arange(self.nb * self.nb + 1))
        # affine maps: lambda_{1,2} = Tinv @ (x - p0)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self._p0 = p[:, 0]
        self._inv = np.stack(
            [
                np.stack([e2[:, 1], -e2[:, 0]], axis=1),
                np.stack([-e1[:, 1], e1[:, 0]], axis=1),
            ],
            axis=1,
        ) / det[:, None, None]

    def _bin_xy(self, pts):
        b = np.floor((pts - self.origin) / self.cell).astype(np.int64)
        return np.clip(b, 0, self.nb - 1)

    def barycentric(self, tri, points):
        d = points - self._p0[tri]
        l12 = np.einsum("nij,nj->ni", self._inv[tri], d)
        return np.column_stack([1.0 - l12.sum(axis=1), l12])

    def locate(self, points, tol=1e-10, chunk=400_000):
        """Return ``(triangle_index, barycentric)``; index is -1 when not found."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(pts)
        tri_out = np.full(n, -1, dtype=np.int64)
        bary_out = np.zeros((n, 3))
        for s in range(0, n, chunk):
            sl = slice(s, min(n, s + chunk))
            t, b = self._locate_chunk(pts[sl], tol)
            tri_out[sl] = t
            bary_out[sl] = b
        return tri_out, bary_out

    def _locate_chunk(self, pts, tol):
        n = len(pts)
        b = self._bin_xy(pts)
        bid = b[:, 1] * self.nb + b[:, 0]
        start = self._bin_ptr[bid]
        counts = self._bin_ptr[bid + 1] - start
        pid = np.repeat(np.arange(n), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        cand = self._bin_tris[np.repeat(start, counts) + offs]
        lam = self.barycentric(cand, pts[pid])
        score = lam.min(axis=1)
        # best candidate per point: sort by (point, -score)
        order = np.lexsort((-score, pid))
        pid_s = pid[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = pid_s[1:] != pid_s[:-1]
        best = order[first]
        tri = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        ok = score[best] >= -tol
        tri[pid[best][ok]] = cand[best][ok]
        bary[pid[best][ok]] = lam[best][ok]
        # points outside the bbox of every bin triangle keep -1; points whose
        # bin is empty were never expanded and also keep -1
        return tri, bary
