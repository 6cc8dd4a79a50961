"""Effective matrices from periodic cell problems on the unit cell."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .coefficients import MatrixField
from .exceptions import CellSolveFailed, NotConverged
from .fem import triangle_rule
from .solver import solve_spd


@dataclass(frozen=True)
class PeriodicCellMesh:
    """Structured ``n x n`` triangulation of the unit cell with periodic vertices.

    Vertex ``(i, j)`` has index ``(j % n) * n + (i % n)``; ``coords`` holds the
    unwrapped corner positions of every triangle, ``(nt, 3, 2)``.
    """

    n: int
    triangles: np.ndarray
    coords: np.ndarray

    @property
    def n_dofs(self):
        return self.n * self.n

    @property
    def area(self):
        return 0.5 / self.n**2


def periodic_cell_mesh(n):
    if n < 2:
        raise ValueError("cell resolution needs n >= 2")
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()

    def vid(a, b):
        return (b % n) * n + (a % n)

    h = 1.0 / n
    lower = np.column_stack([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
    upper = np.column_stack([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    x0 = np.column_stack([i, j]) * h
    cl = np.stack([x0, x0 + [h, 0], x0 + [h, h]], axis=1)
    cu = np.stack([x0, x0 + [h, h], x0 + [0, h]], axis=1)
    return PeriodicCellMesh(n, np.vstack([lower, upper]), np.vstack([cl, cu]))


def _gradients(coords):
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1)


def _cell_average(fast, x, mesh: PeriodicCellMesh, quad_order):
    """Element averages of ``a(x, .)`` as ``(nt, 2, 2)`` matrices."""
    rule = triangle_rule(quad_order)
    lam = rule.barycentric
    out = np.zeros((len(mesh.triangles), 2, 2))
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    for q in range(len(lam)):
        y = np.einsum("k,tkd->td", lam[q], mesh.coords)
        v = np.asarray(fast(np.broadcast_to(xs, y.shape), y), dtype=float)
        if v.ndim == 1:
            v = v[:, None, None] * np.eye(2)
        out += 2.0 * rule.weights[q] * v
    return out


@dataclass
class CellProblem:
    """Corrector solutions ``chi_1, chi_2`` (zero mean) at one macro point."""

    x: np.ndarray
    mesh: PeriodicCellMesh
    coefficient: np.ndarray
    correctors: np.ndarray
    effective: np.ndarray
    harmonic_mean: float
    arithmetic_mean: float


def solve_cell_problem(x, fast, n_cell=128, quad_order=4, tol=1e-12):
    """Solve both periodic corrector problems at macro point ``x``.

    ``fast(x, y)`` returns the coefficient for fast variables ``y`` in the
    unit cell, either scalar ``(m,)`` or matrix ``(m, 2, 2)``.
    """
    mesh = periodic_cell_mesh(n_cell)
    a = _cell_average(fast, x, mesh, quad_order)
    g = _gradients(mesh.coords)
    area = mesh.area
    nd = mesh.n_dofs
    t = mesh.triangles
    local = area * np.einsum("tid,tde,tje->tij", g, a, g)
    K = sp.csr_matrix(
        (local.ravel(), (np.repeat(t, 3, axis=1).ravel(), np.tile(t, (1, 3)).ravel())),
        shape=(nd, nd),
    )
    chi = np.zeros((2, nd))
    free = np.arange(1, nd)
    Kf = K[free][:, free]
    for j in range(2):
        # -int a e_j . grad phi_i
        loc = -area * np.einsum("tid,td->ti", g, a[:, :, j])
        rhs = np.bincount(t.ravel(), weights=loc.ravel(), minlength=nd)
        try:
            x_free, _ = solve_spd(Kf, rhs[free], tol=tol, max_iter=20 * nd)
        except NotConverged as exc:
            raise CellSolveFailed(f"cell problem {j} at x={x}: {exc}") from exc
        chi[j, free] = x_free
        chi[j] -= chi[j].mean()
    # A_ij = int (e_i + grad chi_i) . a (e_j + grad chi_j)
    grads = np.stack([np.einsum("ti,tid->td", chi[j][t], g) for j in range(2)], axis=1)
    E = np.eye(2)[None, :, :] + grads  # (nt, j, d): e_j + grad chi_j
    A = area * np.einsum("tid,tde,tje->ij", E, a, E)
    A = 0.5 * (A + A.T)
    s = a[:, 0, 0] if np.allclose(a[:, 0, 1], 0) and np.allclose(a[:, 0, 0], a[:, 1, 1]) else None
    if s is not None:
        hm = 1.0 / (area * np.sum(1.0 / s))
        am = area * np.sum(s)
    else:
        eig = np.linalg.eigvalsh(a)
        hm = 1.0 / (area * np.sum(1.0 / eig[:, 0]))
        am = area * np.sum(eig[:, 1])
    return CellProblem(np.asarray(x, dtype=float), mesh, a, chi, A, float(hm), float(am))


def effective_matrix_at(x, fast, n_cell=128, quad_order=4):
    """Numerical effective matrix ``A_h(x)`` from the periodic cell problems."""
    return solve_cell_problem(x, fast, n_cell, quad_order).effective


class TabulatedField(MatrixField):
    """Piecewise bilinear interpolation of effective matrices sampled on a grid."""

    def __init__(self, xs, ys, values, bounds, name="tabulated"):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.values = np.asarray(values, dtype=float)  # (nx, ny, 2, 2)
        if len(self.xs) == 1 and len(self.ys) == 1:
            const = self.values[0, 0]
            func = lambda p: np.broadcast_to(const, (len(p), 2, 2)).copy()  # noqa: E731
        else:
            func = self._interp
        super().__init__(func, bounds, scalar=False, name=name)

    def _interp(self, p):
        out = np.empty((len(p), 2, 2))
        xs, ys, v = self.xs, self.ys, self.values
        px = np.clip(p[:, 0], xs[0], xs[-1])
        py = np.clip(p[:, 1], ys[0], ys[-1])
        for i in range(2):
            for j in range(2):
                if len(xs) == 1:
                    out[:, i, j] = np.interp(py, ys, v[0, :, i, j])
                elif len(ys) == 1:
                    out[:, i, j] = np.interp(px, xs, v[:, 0, i, j])
                else:
                    f = RegularGridInterpolator((xs, ys), v[:, :, i, j])
                    out[:, i, j] = f(np.column_stack([px, py]))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "A11", "A12", "A22"])
            for a, x in enumerate(self.xs):
                for b, y in enumerate(self.ys):
                    m = self.values[a, b]
                    w.writerow([repr(float(v)) for v in (x, y, m[0, 0], m[0, 1], m[1, 1])])


def load_effective_csv(path, bounds=None):
    """Reload a table written by ``TabulatedField.to_csv``."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    vals = np.zeros((len(xs), len(ys), 2, 2))
    ix = np.searchsorted(xs, rows[:, 0])
    iy = np.searchsorted(ys, rows[:, 1])
    vals[ix, iy, 0, 0] = rows[:, 2]
    vals[ix, iy, 0, 1] = vals[ix, iy, 1, 0] = rows[:, 3]
    vals[ix, iy, 1, 1] = rows[:, 4]
    if bounds is None:
        eig = np.linalg.eigvalsh(vals.reshape(-1, 2, 2))
        bounds = (eig[:, 0].min(), eig[:, 1].max())
    return TabulatedField(xs, ys, vals, bounds, name=f"table {path}")


def tabulate_effective(fast, xs, ys, n_cell=64, quad_order=4, name="effective"):
    """Effective matrices on the grid ``xs x ys`` as an interpolating field.

    The declared bounds are the Voigt-Reuss range over the samples:
    smallest harmonic mean to largest arithmetic mean of the cell coefficient.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    vals = np.zeros((len(xs), len(ys), 2, 2))
    lo, hi = np.inf, -np.inf
    for a, x in enumerate(xs):
        for b, y in enumerate(ys):
            cp = solve_cell_problem(np.array([x, y]), fast, n_cell, quad_order)
            vals[a, b] = cp.effective
            lo = min(lo, cp.harmonic_mean)
            hi = max(hi, cp.arithmetic_mean)
    return TabulatedField(xs, ys, vals, (lo, hi), name=name)


def voigt_reuss_ok(problem: CellProblem, tol=1e-3):
    """Eigenvalues of the effective matrix lie between harmonic and arithmetic means."""
    eig = np.linalg.eigvalsh(problem.effective)
    return bool(eig[0] >= problem.harmonic_mean - tol and eig[1] <= problem.arithmetic_mean + tol)
