"""
Effective coefficients from periodic cell problems
==================================================

A laminate ``2 + sin(2 pi y1)`` has the harmonic mean in the layered
direction and the arithmetic mean along the layers.  The second part
compares the cell-problem matrix of Example 1 with its closed form.
"""
import numpy as np

from nitsche_hybrid.coefficients import example1_effective, example1_fast
from nitsche_hybrid.upscaling import effective_matrix_at, solve_cell_problem, voigt_reuss_ok


def laminate(x, y):
    return 2.0 + np.sin(2 * np.pi * y[:, 0])


for n in (16, 32, 64, 128):
    A = effective_matrix_at([0.5, 0.5], laminate, n_cell=n)
    print(f"n_cell={n:4d}  A11-sqrt(3)={A[0, 0] - np.sqrt(3):+.2e}  A22-2={A[1, 1] - 2:+.2e}")

x = np.array([0.3, 0.8])
cp = solve_cell_problem(x, example1_fast(), n_cell=64)
print("cell problem:\n", cp.effective)
print("closed form:\n", example1_effective().evaluate(x[None])[0])
print("Voigt-Reuss bounds hold:", voigt_reuss_ok(cp, tol=1e-10))
