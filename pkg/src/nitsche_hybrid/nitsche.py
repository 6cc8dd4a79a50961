"""Nitsche coupling of the fine space on K1 and the coarse space on K2."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import BadBounds, NonzeroRhoOnInterface, PenaltyBelowBound
from .fem import (
    FeSpace,
    ReducedSystem,
    apply_dirichlet,
    assemble_load,
    assemble_volume,
    basis_values,
    line_rule,
)
from .interface import InterfaceMesh

RHO_TOL = 1e-12


def penalty_lower_bound(r, sigma, lam, Lam, n=2):
    """Explicit sufficient penalty ``gamma_0`` for coercivity.

    ``16 sqrt(3)/9 * r (r+1) sigma Lam^2 / min(1, lam^2)`` in 2D and
    ``32 sqrt(3)/27 * r (r+2) sigma Lam^2 / min(1, lam^2)`` in 3D.
    """
    if lam <= 0 or Lam <= 0 or lam > Lam:
        raise BadBounds(f"need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
    if r < 1 or sigma < 1:
        raise ValueError("need r >= 1 and sigma >= 1")
    if n == 2:
        c = 16.0 * np.sqrt(3.0) / 9.0 * r * (r + 1)
    elif n == 3:
        c = 32.0 * np.sqrt(3.0) / 27.0 * r * (r + 2)
    else:
        raise ValueError("n must be 2 or 3")
    return c * sigma * Lam**2 / min(1.0, lam**2)


def _barycentric_in(space: FeSpace, tri, pts):
    p = space.mesh.vertices[space.mesh.triangles[tri]]
    g = space.grad_lambda[tri]
    l12 = np.einsum("nkd,nd->nk", g[:, 1:], pts - p[:, 0])
    return np.column_stack([1.0 - l12.sum(axis=1), l12])


@dataclass
class InterfaceTraces:
    """Basis traces of both sides at the interface quadrature points.

    Arrays are indexed ``(edge, point, local dof)``; ``jump`` holds
    ``phi`` for fine dofs and ``-phi`` for coarse dofs, ``grad_n`` the
    coefficient-weighted normal fluxes ``b grad(phi) . n``.
    """

    dofs: np.ndarray
    weights: np.ndarray
    jump: np.ndarray
    flux: np.ndarray
    flux_t: np.ndarray
    points: np.ndarray


def interface_traces(coef, spaces, interface: InterfaceMesh, n_points=3, check_rho=True):
    Vh, VH = spaces
    m = len(interface)
    s, w = line_rule(n_points)
    nq = len(s)
    pts = interface.p0[:, None, :] + s[None, :, None] * (interface.p1 - interface.p0)[:, None, :]
    flat = pts.reshape(-1, 2)
    ft = np.repeat(interface.fine_triangle, nq)
    ct = np.repeat(interface.coarse_triangle, nq)
    if check_rho and hasattr(coef, "rho"):
        r = coef.rho.evaluate(flat)
        if np.any(np.abs(r) > RHO_TOL):
            raise NonzeroRhoOnInterface(
                f"transition function reaches {np.abs(r).max():.3e} on the interface"
            )
    if coef is None:
        b = np.broadcast_to(np.eye(2), (len(flat), 2, 2))
    else:
        b = coef.evaluate(flat)
    lam_f = _barycentric_in(Vh, ft, flat)
    lam_c = _barycentric_in(VH, ct, flat)
    phi_f = basis_values(Vh.degree, lam_f)
    phi_c = basis_values(VH.degree, lam_c)
    g_f = Vh.grads_at(lam_f, ft)
    g_c = VH.grads_at(lam_c, ct)
    n = np.repeat(interface.normal, nq, axis=0)
    bn = np.einsum("nij,nj->ni", b, n)  # b^T n pairs with grad: (b grad phi).n = grad phi . b^T n
    btn = np.einsum("nji,nj->ni", b, n)
    w1 = np.repeat(interface.omega1, nq)[:, None]
    w2 = np.repeat(interface.omega2, nq)[:, None]
    flux = np.hstack([w1 * np.einsum("nid,nd->ni", g_f, btn), w2 * np.einsum("nid,nd->ni", g_c, btn)])
    flux_t = np.hstack([w1 * np.einsum("nid,nd->ni", g_f, bn), w2 * np.einsum("nid,nd->ni", g_c, bn)])
    jump = np.hstack([phi_f, -phi_c])
    nl = jump.shape[1]
    dofs = np.hstack(
        [Vh.cell_dofs[interface.fine_triangle], VH.cell_dofs[interface.coarse_triangle] + Vh.n_dofs]
    )
    length = interface.lengths
    return InterfaceTraces(
        dofs=dofs,
        weights=w[None, :] * length[:, None],
        jump=jump.reshape(m, nq, nl),
        flux=flux.reshape(m, nq, nl),
        flux_t=flux_t.reshape(m, nq, nl),
        points=pts,
    )


def _scatter(dofs, local, n):
    nl = dofs.shape[1]
    rows = np.repeat(dofs, nl, axis=1).ravel()
    cols = np.tile(dofs, (1, nl)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def interface_matrices(coef, spaces, interface, n_points=3, check_rho=True):
    """Return ``(C, D, P)`` with entries (test i, trial j)

    * ``C[i, j] = int_e {b grad phi_j . n}_w [phi_i]``
    * ``D[i, j] = int_e {b^T grad phi_i . n}_w [phi_j]``
    * ``P[i, j] = int_e [phi_i][phi_j] / (H_e + h_e)``
    """
    n = spaces[0].n_dofs + spaces[1].n_dofs
    if len(interface) == 0:
        z = sp.csr_matrix((n, n))
        return z, z, z
    tr = interface_traces(coef, spaces, interface, n_points, check_rho)
    wq = tr.weights
    C = np.einsum("eq,eqi,eqj->eij", wq, tr.jump, tr.flux)
    D = np.einsum("eq,eqi,eqj->eij", wq, tr.flux_t, tr.jump)
    pen = wq / (interface.h_e + interface.H_e)[:, None]
    P = np.einsum("eq,eqi,eqj->eij", pen, tr.jump, tr.jump)
    return _scatter(tr.dofs, C, n), _scatter(tr.dofs, D, n), _scatter(tr.dofs, P, n)


@dataclass
class NitscheSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    reduced: ReducedSystem
    gamma: float
    gamma0: float
    interface: InterfaceMesh
    spaces: tuple
    sigma: float

    @property
    def n_fine(self):
        return self.spaces[0].n_dofs

    def split(self, u):
        """Split a full dof vector into its fine and coarse parts."""
        return u[: self.n_fine], u[self.n_fine :]


def nitsche_matrix(coef, spaces, interface, gamma, quad_order=4, refine=(0, 0), check_rho=True):
    """Bilinear form matrix over ``X_h x X_H`` before Dirichlet elimination."""
    Vh, VH = spaces
    A1 = assemble_volume(Vh, coef, quad_order, refine[0])
    A2 = assemble_volume(VH, coef, quad_order, refine[1])
    C, D, P = interface_matrices(coef, spaces, interface, check_rho=check_rho)
    return (sp.block_diag([A1, A2], format="csr") - C - D + gamma * P).tocsr()


def assemble_nitsche(
    coef,
    spaces,
    interface: InterfaceMesh,
    gamma,
    f=1.0,
    *,
    dirichlet=0.0,
    quad_order=4,
    refine=(0, 0),
    sigma=None,
    check_rho=True,
):
    """Assemble and Dirichlet-reduce the hybrid Nitsche system.

    ``dirichlet`` is a constant or a callable ``g(points)`` giving the
    boundary values on the unit-square boundary.  A ``PenaltyBelowBound``
    warning is issued when ``gamma`` is smaller than the explicit bound.
    """
    Vh, VH = spaces
    if sigma is None:
        sigma = max(Vh.mesh.chunkiness, VH.mesh.chunkiness)
    lam, Lam = coef.bounds if coef is not None else (1.0, 1.0)
    gamma0 = penalty_lower_bound(max(Vh.degree, VH.degree), sigma, lam, Lam)
    if gamma < gamma0:
        warnings.warn(
            f"penalty gamma={gamma:g} is below the coercivity bound gamma0={gamma0:.4g}",
            PenaltyBelowBound,
            stacklevel=2,
        )
    B = nitsche_matrix(coef, spaces, interface, gamma, quad_order, refine, check_rho)
    F = np.concatenate(
        [assemble_load(Vh, f, quad_order, refine[0]), assemble_load(VH, f, quad_order, refine[1])]
    )
    fixed = np.concatenate([Vh.dirichlet_dofs, VH.dirichlet_dofs + Vh.n_dofs])
    coords = np.vstack([Vh.dof_coords, VH.dof_coords])
    g = dirichlet(coords[fixed]) if callable(dirichlet) else dirichlet
    reduced = apply_dirichlet(B, F, fixed, g)
    return NitscheSystem(B, F, reduced, float(gamma), float(gamma0), interface, (Vh, VH), float(sigma))


def energy_matrix(spaces, interface, gamma):
    """Matrix ``S`` with ``v^T S v = |||v|||^2`` (broken energy norm squared)."""
    Vh, VH = spaces
    _, _, P = interface_matrices(None, spaces, interface, check_rho=False)
    S = sp.block_diag([assemble_volume(Vh, None, 2), assemble_volume(VH, None, 2)], format="csr")
    return (S + gamma * P).tocsr()


def broken_energy_norm(spaces, interface, gamma, v):
    """``sqrt(sum_i |v|_{1,K_i}^2 + sum_e gamma/(H_e+h_e) ||[v]||_{0,e}^2)``."""
    S = energy_matrix(spaces, interface, gamma)
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(v @ (S @ v), 0.0)))


def write_triplets(path, matrix, rhs=None):
    """Coordinate text dump: ``i j value`` per nonzero, then ``rhs k value`` lines."""
    A = sp.coo_matrix(matrix)
    order = np.lexsort((A.col, A.row))
    with open(path, "w") as fh:
        fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")
        if rhs is not None:
            for k, v in enumerate(np.asarray(rhs, dtype=float)):
                fh.write(f"rhs {k} {float(v)!r}\n")


def read_triplets(path):
    """Inverse of ``write_triplets``; returns ``(csr matrix, rhs or None)``."""
    rows, cols, vals, rhs = [], [], [], []
    with open(path) as fh:
        n, m, _ = map(int, fh.readline()[1:].split())
        for line in fh:
            parts = line.split()
            if parts[0] == "rhs":
                rhs.append(float(parts[2]))
            else:
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    return A, (np.array(rhs) if rhs else None)
