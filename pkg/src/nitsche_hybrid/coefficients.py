"""Matrix-valued coefficient fields and the hybrid micro/macro blend."""
from __future__ import annotations

import numpy as np

from .exceptions import NonCoercive

_I2 = np.eye(2)


class MatrixField:
    """Pointwise symmetric 2x2 coefficient with declared ellipticity bounds.

    Parameters
    ----------
    func : callable
        ``func(points) -> (n,)`` when ``scalar`` is true (the field is that
        scalar times the identity), else ``(n, 2, 2)``.
    bounds : (float, float)
        ``(lam, Lam)`` such that the field lies in ``M(lam, Lam)``.
    """

    def __init__(self, func, bounds, scalar=True, name=""):
        self._func = func
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.scalar = scalar
        self.name = name

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self._func(pts)
        if self.scalar:
            return np.asarray(v, dtype=float)[:, None, None] * _I2
        return np.asarray(v, dtype=float)

    def scalar_values(self, points):
        if not self.scalar:
            raise TypeError(f"{self.name or 'field'} is not scalar")
        return np.asarray(self._func(np.atleast_2d(points)), dtype=float)

    def __repr__(self):
        return f"MatrixField({self.name!r}, bounds={self.bounds})"


def constant_field(value):
    """Constant field; ``value`` is a scalar or a symmetric 2x2 matrix."""
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        c = float(value)
        return MatrixField(lambda x: np.full(len(x), c), (c, c), name=f"{c}*I")
    eig = np.linalg.eigvalsh(value)
    return MatrixField(
        lambda x: np.broadcast_to(value, (len(x), 2, 2)).copy(),
        (eig[0], eig[-1]),
        scalar=False,
        name="constant",
    )


def _check_radii(R1, R2):
    if not (R1 > R2 >= 0):
        raise NonCoercive(f"need R1 > R2 >= 0, got R1={R1}, R2={R2}")


def _ex1_numerator(x, R1, R2):
    return (R1 + R2 * np.sin(2 * np.pi * x[:, 0])) * (R1 + R2 * np.cos(2 * np.pi * x[:, 1]))


def example1_micro(R1=2.5, R2=1.5, eps=0.01):
    """Two-scale coefficient of the first test problem."""
    _check_radii(R1, R2)
    if eps <= 0:
        raise ValueError("eps must be positive")

    def a(x):
        den = (R1 + R2 * np.sin(2 * np.pi * x[:, 0] / eps)) * (
            R1 + R2 * np.sin(2 * np.pi * x[:, 1] / eps)
        )
        return _ex1_numerator(x, R1, R2) / den

    ratio = (R1 - R2) ** 2 / (R1 + R2) ** 2
    return MatrixField(a, (ratio, 1.0 / ratio), name=f"ex1 micro eps={eps}")


def example1_effective(R1=2.5, R2=1.5):
    """Closed-form homogenized matrix of the first test problem."""
    _check_radii(R1, R2)
    den = R1 * np.sqrt(R1**2 - R2**2)
    return MatrixField(
        lambda x: _ex1_numerator(x, R1, R2) / den,
        ((R1 - R2) ** 2 / den, (R1 + R2) ** 2 / den),
        name="ex1 effective",
    )


def example1_fast(R1=2.5, R2=1.5):
    """``(x, y) -> a(x, y)`` with the fast variable ``y`` on the unit cell."""
    _check_radii(R1, R2)

    def a(x, y):
        num = _ex1_numerator(np.atleast_2d(x), R1, R2)
        den = (R1 + R2 * np.sin(2 * np.pi * y[:, 0])) * (R1 + R2 * np.sin(2 * np.pi * y[:, 1]))
        return num / den

    return a


def example2_rough(x):
    """Coefficient without scale separation used inside the defect.

    Each floor acts on its whole bracketed argument, i.e.
    ``floor(8 * (i*x2 - x1/(i+1)))``.
    """
    x1, x2 = x[:, 0], x[:, 1]
    s = np.zeros(len(x))
    for j in range(5):
        for i in range(1, j + 1):
            arg = (
                np.floor(8.0 * (i * x2 - x1 / (i + 1)))
                + np.floor(150.0 * i * x1)
                + np.floor(150.0 * x2)
            )
            s += np.cos(arg) / (j + 1)
    return 3.0 + s / 7.0


EX2_ROUGH_BOUNDS = (
    3.0 - sum(j / (j + 1) for j in range(5)) / 7.0,
    3.0 + sum(j / (j + 1) for j in range(5)) / 7.0,
)
EX2_SMOOTH_BOUNDS = (0.1, 4.1)


def example2_fast(x, y):
    x = np.atleast_2d(x)
    return (
        2.1
        + np.cos(2 * np.pi * y[:, 0]) * np.cos(2 * np.pi * y[:, 1])
        + np.sin(4 * x[:, 0] ** 2 * x[:, 1] ** 2)
    )


def example2_periodic(eps=0.0063):
    """Locally periodic coefficient used outside the defect."""
    return MatrixField(
        lambda x: example2_fast(x, x / eps), EX2_SMOOTH_BOUNDS, name=f"ex2 periodic eps={eps}"
    )


def masked(in_region, inside: MatrixField, outside: MatrixField, name=""):
    """``inside`` where ``in_region(points)`` holds, ``outside`` elsewhere."""
    bounds = (min(inside.bounds[0], outside.bounds[0]), max(inside.bounds[1], outside.bounds[1]))
    scalar = inside.scalar and outside.scalar

    def f(x):
        mask = np.asarray(in_region(x), dtype=bool)
        if scalar:
            out = np.empty(len(x))
            if mask.any():
                out[mask] = inside.scalar_values(x[mask])
            if (~mask).any():
                out[~mask] = outside.scalar_values(x[~mask])
            return out
        out = np.empty((len(x), 2, 2))
        if mask.any():
            out[mask] = inside.evaluate(x[mask])
        if (~mask).any():
            out[~mask] = outside.evaluate(x[~mask])
        return out

    return MatrixField(f, bounds, scalar=scalar, name=name)


def example2_micro(eps=0.0063, in_k0=None):
    """Rough coefficient inside ``K0`` and the periodic one elsewhere."""
    rough = MatrixField(example2_rough, EX2_ROUGH_BOUNDS, name="ex2 rough")
    periodic = example2_periodic(eps)
    if in_k0 is None:
        return periodic
    return masked(in_k0, rough, periodic, name=f"ex2 micro eps={eps}")


def example2_macro(effective_periodic: MatrixField, in_k0=None):
    """Macroscopic coefficient: rough field in ``K0``, upscaled field elsewhere."""
    if in_k0 is None:
        return effective_periodic
    rough = MatrixField(example2_rough, EX2_ROUGH_BOUNDS, name="ex2 rough")
    return masked(in_k0, rough, effective_periodic, name="ex2 macro")


class HybridCoefficient:
    """``b(x) = rho(x) a(x) + (1 - rho(x)) A_h(x)``."""

    def __init__(self, rho, micro: MatrixField, macro: MatrixField):
        self.rho = rho
        self.micro = micro
        self.macro = macro
        self.bounds = (
            min(micro.bounds[0], macro.bounds[0]),
            max(micro.bounds[1], macro.bounds[1]),
        )
        self.scalar = micro.scalar and macro.scalar

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.asarray(self.rho.evaluate(pts), dtype=float)
        out = self.macro.evaluate(pts)
        active = r > 0
        if active.any():
            a = self.micro.evaluate(pts[active])
            ra = r[active][:, None, None]
            out[active] = ra * a + (1.0 - ra) * out[active]
        return out

    def scalar_values(self, points):
        return self.evaluate(points)[:, 0, 0]


def hybridize(rho, micro, macro):
    return HybridCoefficient(rho, micro, macro)


def e_hmm(A, Ah, points):
    """Largest Frobenius-norm deviation between two fields over ``points``."""
    diff = A.evaluate(points) - Ah.evaluate(points)
    return float(np.max(np.sqrt(np.einsum("nij,nij->n", diff, diff))))


def certify(field, points, directions, tol=1e-12):
    """Check both defining inequalities of ``M(lam, Lam)`` at every sample.

    ``directions`` are unit vectors ``(k, 2)``.  Returns ``True`` when
    ``xi.a.xi >= lam |xi|^2`` and ``xi.a.xi >= |a xi|^2 / Lam`` everywhere.
    """
    lam, Lam = field.bounds
    a = field.evaluate(points)
    xi = np.asarray(directions, dtype=float)
    axi = np.einsum("nij,kj->nki", a, xi)
    quad = np.einsum("ki,nki->nk", xi, axi)
    norm2 = (xi**2).sum(axis=1)[None, :]
    ok1 = quad >= lam * norm2 - tol * np.maximum(1, np.abs(quad))
    ok2 = quad >= (axi**2).sum(axis=2) / Lam - tol * np.maximum(1, np.abs(quad))
    return bool(np.all(ok1) and np.all(ok2))
