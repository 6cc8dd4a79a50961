import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from nitsche_hybrid.locate import TriangleLocator
from nitsche_hybrid.mesh import uniform_unit_square


def test_locate_matches_brute_force(well_pair):
    m = well_pair.outer
    loc = TriangleLocator(m.vertices, m.triangles)
    pts = np.random.default_rng(4).random((3000, 2))
    tri, lam = loc.locate(pts)
    found = tri >= 0
    # points outside K2 (inside the hole) are not found
    assert np.all(np.max(np.abs(pts[~found] - 0.5), axis=1) <= 0.1 + 1e-12)
    p = m.vertices[m.triangles[tri[found]]]
    assert np.allclose(np.einsum("nk,nkd->nd", lam[found], p), pts[found], atol=1e-13)
    assert np.all(lam[found] >= -1e-10)


@given(st.integers(1, 12), st.floats(0, 1), st.floats(0, 1))
def test_locate_uniform(n, x, y):
    m = uniform_unit_square(n)
    tri, lam = TriangleLocator(m.vertices, m.triangles).locate(np.array([[x, y]]))
    assert tri[0] >= 0
    assert np.allclose(lam[0] @ m.vertices[m.triangles[tri[0]]], [x, y], atol=1e-13)
