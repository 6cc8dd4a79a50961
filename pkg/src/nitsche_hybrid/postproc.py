"""Reference solutions, error norms on subregions and convergence rates."""
from __future__ import annotations

import csv
import hashlib
import os
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import EmptyRegion, PointOutsideMesh, UnderResolved
from .fem import FeSpace, apply_dirichlet, assemble_load, assemble_volume, p1_gradients, triangle_rule
from .geometry import K0, K2, RING
from .mesh import uniform_unit_square
from .solver import solve_spd

RESULT_COLUMNS = ("example", "defect", "h", "H", "gamma", "e_ueps", "e_u0", "dofs", "seconds")


def quadrature_levels(h, eps):
    """Red-refinement levels so that quadrature sub-triangles are at most ``eps / 8``."""
    if eps is None or h <= eps / 8:
        return 0
    return int(np.ceil(np.log2(h / (eps / 8))))


@dataclass
class ReferenceSolution:
    space: FeSpace
    u: np.ndarray
    key: str = ""

    @property
    def n(self):
        return int(round(np.sqrt(self.space.mesh.n_vertices))) - 1

    def gradients(self):
        return p1_gradients(self.space, self.u)


def descriptor_hash(**descriptor):
    """Stable short hash of a flat descriptor dict."""
    text = ";".join(f"{k}={descriptor[k]!r}" for k in sorted(descriptor))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _cache_path(cache_dir, key):
    return Path(cache_dir) / f"reference_{key}.csv"


def _read_cache(path, key, n_dofs):
    with open(path) as fh:
        head = fh.readline().strip()
    if head != f"# {key}":
        return None
    u = np.loadtxt(path, comments="#")
    return u if len(u) == n_dofs else None


def reference_solve(coefficient, n, f=1.0, eps=None, cache_dir=None, descriptor=None, tol=1e-10):
    """Conforming P1 solution of ``-div(a grad u) = f`` on a uniform ``n x n`` mesh.

    Homogeneous Dirichlet data on the whole boundary.  With ``cache_dir`` and
    ``descriptor`` (a flat dict identifying the problem) the dof values are
    stored as plain text and reloaded on the next call.
    """
    h = 1.0 / n
    if eps is not None and h > eps / 4:
        warnings.warn(
            f"reference mesh size {h:.3g} exceeds eps/4 = {eps / 4:.3g}", UnderResolved, stacklevel=2
        )
    space = FeSpace(uniform_unit_square(n), 1)
    key = ""
    if cache_dir is not None and descriptor is not None:
        key = descriptor_hash(n=n, **descriptor)
        path = _cache_path(cache_dir, key)
        if path.exists():
            u = _read_cache(path, key, space.n_dofs)
            if u is not None:
                return ReferenceSolution(space, u, key)
    levels = quadrature_levels(h * np.sqrt(2), eps)
    A = assemble_volume(space, coefficient, quad_order=4, refine=levels)
    F = assemble_load(space, f, quad_order=4)
    red = apply_dirichlet(A, F, space.dirichlet_dofs)
    x, _ = solve_spd(red.matrix, red.rhs, tol=tol)
    u = red.expand(x)
    if key:
        os.makedirs(cache_dir, exist_ok=True)
        np.savetxt(_cache_path(cache_dir, key), u, fmt="%.17g", header=key, comments="# ")
    return ReferenceSolution(space, u, key)


REGIONS = {"K0": (K0,), "ring": (RING,), "K1": (K0, RING), "K2": (K2,)}


def _locate_gradients(space, u, pts, tol=1e-9):
    tri, lam = space.locator.locate(pts, tol=tol)
    if np.any(tri < 0):
        raise PointOutsideMesh(f"{np.count_nonzero(tri < 0)} quadrature points fall outside the mesh")
    coeff = np.asarray(u)[space.cell_dofs[tri]]
    return np.einsum("ni,nid->nd", coeff, space.grads_at(lam, tri))


def region_quadrature(reference: ReferenceSolution, partition, region, quad_order=2, chunk=2_000_000):
    """Quadrature points of the reference mesh lying in ``region``.

    Returns ``(points, weights, triangle)``; points are classified one by
    one, so reference elements cut by a region boundary contribute partially.
    """
    codes = REGIONS[region]
    mesh = reference.space.mesh
    rule = triangle_rule(quad_order)
    lam = rule.barycentric
    jac = 2.0 * mesh.areas
    pts_all, w_all, t_all = [], [], []
    # only triangles whose bounding box meets the region bounding box matter
    geom = partition.k2_geometry if region == "K2" else (
        partition.k0_geometry if region == "K0" else partition.k1_geometry
    )
    bx0, by0, bx1, by1 = geom.bounds
    p = mesh.vertices[mesh.triangles]
    lo, hi = p.min(axis=1), p.max(axis=1)
    cand = np.flatnonzero((hi[:, 0] >= bx0) & (lo[:, 0] <= bx1) & (hi[:, 1] >= by0) & (lo[:, 1] <= by1))
    for s in range(0, len(cand), chunk):
        tri = cand[s : s + chunk]
        for q in range(len(lam)):
            x = np.einsum("k,tkd->td", lam[q], p[tri])
            code = partition.classify(x)
            keep = np.isin(code, codes)
            pts_all.append(x[keep])
            w_all.append(rule.weights[q] * jac[tri[keep]])
            t_all.append(tri[keep])
    if not pts_all or sum(len(a) for a in pts_all) == 0:
        raise EmptyRegion(f"no reference quadrature point lies in {region}")
    return np.vstack(pts_all), np.concatenate(w_all), np.concatenate(t_all)


def h1_seminorm_error_on(region, partition, numerical, reference: ReferenceSolution, quad_order=2):
    """Relative error ``|ref - num|_{1,region} / |ref|_{1,region}``.

    ``numerical`` is ``(space, u)`` for the mesh covering ``region`` (the
    fine space for K0/K1/ring, the coarse one for K2).  Integration runs on
    the reference mesh, whose P1 gradient is constant per element.
    """
    space, u = numerical
    pts, w, tri = region_quadrature(reference, partition, region, quad_order)
    gref = reference.gradients()[tri]
    gnum = _locate_gradients(space, u, pts)
    num2 = float(np.sum(w * np.sum((gref - gnum) ** 2, axis=1)))
    den2 = float(np.sum(w * np.sum(gref**2, axis=1)))
    if den2 == 0:
        raise EmptyRegion(f"reference has zero seminorm on {region}")
    return np.sqrt(num2 / den2)


def h1_seminorm_on(region, partition, reference: ReferenceSolution, quad_order=2):
    """``|ref|_{1,region}`` integrated on the reference mesh."""
    pts, w, tri = region_quadrature(reference, partition, region, quad_order)
    g = reference.gradients()[tri]
    return float(np.sqrt(np.sum(w * np.sum(g**2, axis=1))))


def convergence_rates(errors):
    """``log2(e_{k-1} / e_k)`` for successive halvings of the mesh parameter."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 2:
        return np.zeros(0)
    return np.log2(e[:-1] / e[1:])


@dataclass
class ErrorReport:
    example: int
    defect: str
    h: float
    H: float
    gamma: float
    e_ueps: float
    e_u0: float
    dofs: int
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self):
        d = asdict(self)
        return [d[c] for c in RESULT_COLUMNS]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(path, reports, include_seconds=True):
    """Write ``results.csv`` with the fixed column order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in reports:
            row = r.row()
            if not include_seconds:
                row[-1] = 0.0
            w.writerow([_fmt(v) for v in row])


def read_results(path):
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(
                ErrorReport(
                    example=int(rec["example"]),
                    defect=rec["defect"],
                    h=float(rec["h"]),
                    H=float(rec["H"]),
                    gamma=float(rec["gamma"]),
                    e_ueps=float(rec["e_ueps"]),
                    e_u0=float(rec["e_u0"]),
                    dofs=int(rec["dofs"]),
                    seconds=float(rec["seconds"]),
                )
            )
    return out


def write_diagnostics(path, reports):
    """Per-run extras (gamma0, sigma, assumption flags, ...) beside the results."""
    keys = sorted({k for r in reports for k in r.extra})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "H", *keys])
        for r in reports:
            w.writerow([_fmt(r.h), _fmt(r.H), *[_fmt(r.extra.get(k, "")) for k in keys]])


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
