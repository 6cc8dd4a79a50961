"""Jacobi-preconditioned conjugate gradients for the assembled SPD systems."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import NotConverged, SolverBreakdown


@dataclass
class SolveReport:
    iterations: int
    residual: float
    seconds: float
    converged: bool = True


def solve_spd(matrix, rhs, tol=1e-10, max_iter=None, x0=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops once the true relative residual ``|b - A x| / |b|`` is at most
    ``tol``.  ``max_iter`` defaults to ``50 * sqrt(n)`` (at least 100).

    Raises
    ------
    NotConverged
        With the best iterate in ``exc.x`` when ``max_iter`` is reached.
    SolverBreakdown
        When a search direction has non-positive curvature.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = max(100, int(50 * np.sqrt(n)))
    bnorm = np.linalg.norm(b)
    if n == 0 or bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, time.perf_counter() - t0)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverBreakdown("non-positive diagonal entry; matrix is not SPD")
    dinv = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    best_x, best_res = x.copy(), np.inf
    last_true = np.inf
    stalls = 0
    it = 0
    while it < max_iter:
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            # guard against drift of the recursive residual
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= tol:
                return x, SolveReport(it, true_res, time.perf_counter() - t0)
            if true_res < best_res:
                best_x, best_res = x.copy(), true_res
            # restarts that no longer improve mean round-off has taken over
            stalls = stalls + 1 if true_res > 0.5 * last_true else 0
            last_true = true_res
            if stalls >= 3:
                break
            r = b - A @ x
            z = dinv * r
            p = z.copy()
            rz = r @ z
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            rep = SolveReport(it, min(best_res, res), time.perf_counter() - t0, False)
            raise SolverBreakdown(
                f"non-positive curvature at iteration {it}", x=best_x if best_res < np.inf else x, report=rep
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
        it += 1
    res = np.linalg.norm(b - A @ x) / bnorm
    if res <= tol:
        return x, SolveReport(it, res, time.perf_counter() - t0)
    if res < best_res:
        best_x, best_res = x, res
    rep = SolveReport(it, best_res, time.perf_counter() - t0, False)
    reason = "stagnated" if stalls >= 3 else f"did not reach tol={tol:g} in {max_iter} iterations"
    raise NotConverged(
        f"CG {reason} (true residual {best_res:.3e}, tol {tol:g})",
        x=best_x,
        report=rep,
    )
