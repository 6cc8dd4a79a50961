"""Lagrange finite elements on triangles: quadrature, spaces, assembly, Dirichlet data."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import PointOutsideMesh, QuadratureOrderTooLow
from .locate import TriangleLocator
from .mesh import TAG_DIRICHLET, Triangulation


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle ``(0,0), (1,0), (0,1)``.

    ``points`` are reference coordinates, ``weights`` sum to the reference
    area 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def barycentric(self):
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])

    def refined(self, levels):
        """Composite rule on ``4**levels`` congruent sub-triangles."""
        if levels <= 0:
            return self
        pts, wts = self.points, self.weights
        for _ in range(levels):
            # red refinement: three corner copies scaled by 1/2 and one flipped middle
            half = 0.5 * pts
            corner = [half, half + [0.5, 0.0], half + [0.0, 0.5]]
            middle = np.array([0.5, 0.5]) - half
            pts = np.vstack(corner + [middle])
            wts = np.tile(0.25 * wts, 4)
        return QuadratureRule(pts, wts, self.degree)


def _sym3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)], [w] * 3


def triangle_rule(order):
    """Symmetric Gauss rule exact for polynomials of total degree ``order``."""
    if order < 1:
        raise QuadratureOrderTooLow(f"quadrature order must be >= 1, got {order}")
    if order == 1:
        pts, wts, deg = [(1 / 3, 1 / 3)], [1.0], 1
    elif order == 2:
        pts, wts = _sym3(1 / 6, 1 / 3)
        deg = 2
    elif order <= 4:
        p1, w1 = _sym3(0.44594849091596488632, 0.22338158967801146570)
        p2, w2 = _sym3(0.09157621350977074346, 0.10995174365532186764)
        pts, wts, deg = p1 + p2, w1 + w2, 4
    elif order == 5:
        p1, w1 = _sym3(0.47014206410511508977, 0.13239415278850618074)
        p2, w2 = _sym3(0.10128650732345633880, 0.12593918054482715260)
        pts, wts, deg = [(1 / 3, 1 / 3)] + p1 + p2, [0.225] + w1 + w2, 5
    else:
        raise ValueError(f"no triangle rule of order {order} (max 5)")
    return QuadratureRule(np.array(pts, dtype=float), 0.5 * np.array(wts), deg)


def line_rule(n=3):
    """Gauss-Legendre points on ``[0, 1]`` with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# reference basis in barycentric coordinates; local P2 edge dofs are (0,1), (1,2), (2,0)
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def basis_values(degree, lam):
    lam = np.atleast_2d(lam)
    if degree == 1:
        return lam.copy()
    if degree == 2:
        vert = lam * (2.0 * lam - 1.0)
        edge = np.column_stack([4.0 * lam[:, a] * lam[:, b] for a, b in _P2_EDGES])
        return np.hstack([vert, edge])
    raise NotImplementedError(f"degree {degree} not supported")


def basis_dlam(degree, lam):
    """Derivatives of the basis with respect to the three barycentrics, ``(n, nloc, 3)``."""
    lam = np.atleast_2d(lam)
    n = len(lam)
    if degree == 1:
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    if degree == 2:
        d = np.zeros((n, 6, 3))
        for i in range(3):
            d[:, i, i] = 4.0 * lam[:, i] - 1.0
        for k, (a, b) in enumerate(_P2_EDGES):
            d[:, 3 + k, a] = 4.0 * lam[:, b]
            d[:, 3 + k, b] = 4.0 * lam[:, a]
        return d
    raise NotImplementedError(f"degree {degree} not supported")


class FeSpace:
    """Continuous Lagrange space of degree ``r`` (1 or 2) on a triangulation."""

    def __init__(self, mesh: Triangulation, degree: int = 1):
        if degree not in (1, 2):
            raise NotImplementedError("only degrees 1 and 2 are implemented")
        self.mesh = mesh
        self.degree = degree
        t = mesh.triangles
        nv = mesh.n_vertices
        if degree == 1:
            self.cell_dofs = t.copy()
            self.dof_coords = mesh.vertices.copy()
            self._edge_index = None
        else:
            e = np.concatenate([t[:, [a, b]] for a, b in _P2_EDGES])
            key = np.sort(e, axis=1)
            uniq, inv = np.unique(key, axis=0, return_inverse=True)
            inv = inv.reshape(3, -1).T
            self.cell_dofs = np.hstack([t, nv + inv])
            mid = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mid])
            self._edge_index = {tuple(k): i for i, k in enumerate(uniq.tolist())}

    @property
    def n_dofs(self):
        return len(self.dof_coords)

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    @cached_property
    def grad_lambda(self):
        """Constant gradients of the barycentric coordinates, ``(nt, 3, 2)``."""
        p = self.mesh.vertices[self.mesh.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
        return np.stack([-g1 - g2, g1, g2], axis=1)

    def edge_dofs(self, edges, tag=None):
        """Dofs located on the given vertex-pair edges (vertices plus P2 midpoints)."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        dofs = [edges.ravel()]
        if self.degree == 2:
            nv = self.mesh.n_vertices
            dofs.append(
                np.array(
                    [nv + self._edge_index[tuple(sorted(e))] for e in edges.tolist()],
                    dtype=np.int64,
                )
            )
        return np.unique(np.concatenate(dofs))

    @cached_property
    def dirichlet_dofs(self):
        """Dofs on the unit-square boundary."""
        return self.edge_dofs(self.mesh.edges_with_tag(TAG_DIRICHLET))

    @cached_property
    def locator(self):
        return TriangleLocator(self.mesh.vertices, self.mesh.triangles)

    def physical_points(self, lam, tri=None):
        """Map barycentric points (nq, 3) into every triangle -> (nt, nq, 2)."""
        p = self.mesh.vertices[self.mesh.triangles if tri is None else self.mesh.triangles[tri]]
        return np.einsum("qk,tkd->tqd", lam, p)

    def grads_at(self, lam, tri=None):
        """Physical basis gradients at barycentric points ``lam`` (one per triangle).

        ``lam`` has shape ``(n, 3)`` matched to triangles ``tri``; returns
        ``(n, nloc, 2)``.
        """
        gl = self.grad_lambda if tri is None else self.grad_lambda[tri]
        return np.einsum("nik,nkd->nid", basis_dlam(self.degree, lam), gl)

    def interpolate(self, func):
        """Nodal interpolant of a callable ``func(points) -> values``."""
        return np.asarray(func(self.dof_coords), dtype=float)


def _field_values(field, pts):
    if field is None:
        return np.broadcast_to(np.eye(2), (len(pts), 2, 2))
    return field.evaluate(pts)


def assemble_volume(space: FeSpace, field=None, quad_order=4, refine=0, triangles=None):
    """Stiffness matrix ``sum_tau int_tau (B grad phi_j) . grad phi_i``.

    ``field`` is anything with ``evaluate(points) -> (n, 2, 2)``; ``None``
    means the identity.  ``refine`` applies the quadrature rule on
    ``4**refine`` sub-triangles of every element.
    """
    rule = triangle_rule(quad_order).refined(refine)
    mesh = space.mesh
    tri = np.arange(mesh.n_triangles) if triangles is None else np.asarray(triangles)
    jac = 2.0 * mesh.areas[tri]
    lam = rule.barycentric
    x = space.physical_points(lam, tri)
    nt, nq = x.shape[:2]
    nloc = space.n_local
    if space.degree == 1:
        # gradients are constant: average the coefficient first
        bbar = np.zeros((nt, 2, 2))
        for q in range(nq):
            bbar += rule.weights[q] * _field_values(field, x[:, q])
        g = space.grad_lambda[tri]
        local = jac[:, None, None] * np.einsum("tid,tde,tje->tij", g, bbar, g)
    else:
        local = np.zeros((nt, nloc, nloc))
        for q in range(nq):
            b = _field_values(field, x[:, q])
            g = space.grads_at(np.broadcast_to(lam[q], (nt, 3)), tri)
            local += (rule.weights[q] * jac)[:, None, None] * np.einsum(
                "tid,tde,tje->tij", g, b, g
            )
    return _scatter(space.cell_dofs[tri], local, space.n_dofs)


def _scatter(cell_dofs, local, n):
    nloc = cell_dofs.shape[1]
    rows = np.repeat(cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(cell_dofs, (1, nloc)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_load(space: FeSpace, f=1.0, quad_order=4, refine=0):
    """Load vector ``int f phi_i``; ``f`` is a constant or ``f(points) -> (n,)``."""
    rule = triangle_rule(quad_order).refined(refine)
    mesh = space.mesh
    jac = 2.0 * mesh.areas
    lam = rule.barycentric
    phi = basis_values(space.degree, lam)
    x = space.physical_points(lam)
    if callable(f):
        fv = np.stack([np.asarray(f(x[:, q]), dtype=float) for q in range(len(lam))], axis=1)
    else:
        fv = np.full(x.shape[:2], float(f))
    local = jac[:, None] * np.einsum("tq,q,qi->ti", fv, rule.weights, phi)
    return np.bincount(
        space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs
    )


@dataclass
class ReducedSystem:
    """Linear system with Dirichlet dofs eliminated."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n: int

    def expand(self, x_free):
        """Full dof vector with the Dirichlet values reinstated."""
        x = np.zeros(self.n)
        x[self.free] = x_free
        x[self.fixed] = self.fixed_values
        return x


def apply_dirichlet(matrix, rhs, boundary_dofs, value=0.0):
    """Eliminate rows and columns of ``boundary_dofs``.

    ``value`` is a scalar or one value per boundary dof.
    """
    A = sp.csr_matrix(matrix)
    n = A.shape[0]
    fixed = np.unique(np.asarray(boundary_dofs, dtype=np.int64))
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    g = np.broadcast_to(np.asarray(value, dtype=float), fixed.shape).copy()
    b = np.asarray(rhs, dtype=float)[free]
    if len(fixed) and np.any(g != 0):
        b = b - A[free][:, fixed] @ g
    return ReducedSystem(A[free][:, free].tocsr(), b, free, fixed, g, n)


def evaluate_fe_function(space: FeSpace, u, points, tol=1e-10):
    """Values and gradients of the finite element function ``u`` at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri, lam = space.locator.locate(pts, tol=tol)
    if np.any(tri < 0):
        bad = pts[tri < 0][0]
        raise PointOutsideMesh(f"point {bad} is outside the mesh")
    return _eval_located(space, u, tri, lam)


def _eval_located(space, u, tri, lam):
    coeff = np.asarray(u)[space.cell_dofs[tri]]
    phi = basis_values(space.degree, lam)
    val = np.einsum("ni,ni->n", coeff, phi)
    grad = np.einsum("ni,nid->nd", coeff, space.grads_at(lam, tri))
    return val, grad


def p1_gradients(space: FeSpace, u):
    """Elementwise constant gradients of a P1 function, ``(nt, 2)``."""
    if space.degree != 1:
        raise ValueError("p1_gradients needs a degree-1 space")
    return np.einsum("ti,tid->td", np.asarray(u)[space.cell_dofs], space.grad_lambda)
