import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nitsche_hybrid.exceptions import BufferEscapesDomain, DegenerateShape
from nitsche_hybrid.geometry import (
    K0,
    K2,
    OUTSIDE,
    RING,
    Channel,
    Ellipse,
    EllipseSpec,
    Well,
    build_partition,
    default_shape,
    polygon_area,
    polygonize_ellipse,
    read_polygon,
    write_polygon,
)


def test_well_partition():
    p = build_partition(Well((0.5, 0.5), 0.05), 0.05)
    k1 = p.k1[0]
    assert np.allclose(k1.min(axis=0), [0.4, 0.4], atol=1e-15)
    assert np.allclose(k1.max(axis=0), [0.6, 0.6], atol=1e-15)
    assert p.gamma_length == pytest.approx(0.8, abs=1e-12)
    assert abs(p.d - 0.05) < 1e-12
    assert p.area_k2 == pytest.approx(0.96, abs=1e-12)


def test_ellipse_partition_rectangles():
    p = build_partition(default_shape("ellipse"), 0.02)
    assert len(p.k1) == 2
    for r in p.k1:
        ext = r.max(axis=0) - r.min(axis=0)
        assert ext == pytest.approx([0.54, 0.06], abs=1e-12)
    # inscribed polygon touches the axis ends, so the distance is exactly delta there
    assert p.d == pytest.approx(0.02, abs=1e-12)


def test_channel_offset_distance():
    p = build_partition(default_shape("channel"), 0.025)
    assert p.d == pytest.approx(0.025, abs=1e-12)
    assert len(p.k0) == 1 and len(p.k1) == 1


@pytest.mark.parametrize(
    "shape, delta, exc",
    [
        (Well((0.5, 0.5), 0.2), 0.4, BufferEscapesDomain),
        (Well((0.5, 0.5), 0.0), 0.05, DegenerateShape),
        (Well((0.5, 0.5), 0.05), 0.0, DegenerateShape),
        (Channel(width=-0.1), 0.05, DegenerateShape),
    ],
)
def test_partition_errors(shape, delta, exc):
    with pytest.raises(exc):
        build_partition(shape, delta)


def test_overlapping_ellipse_buffers_rejected():
    e = Ellipse((EllipseSpec((0.5, 0.5), 0.2, 0.01), EllipseSpec((0.5, 0.52), 0.2, 0.01)))
    with pytest.raises(DegenerateShape):
        build_partition(e, 0.02)


def test_polygonize_ellipse_square():
    p = polygonize_ellipse((0, 0), 1, 1, n_segments=4, min_segments=4)
    assert np.allclose(p, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_polygonize_ellipse_area():
    p = polygonize_ellipse((0.5, 0.5), 0.25, 0.01, n_segments=64)
    assert len(p) == 64
    assert abs(polygon_area(p) - np.pi * 0.25 * 0.01) / (np.pi * 0.25 * 0.01) < 0.01


def test_polygonize_ellipse_too_few():
    with pytest.raises(DegenerateShape):
        polygonize_ellipse((0, 0), 1, 0.5, n_segments=7)


@given(
    st.floats(0.05, 0.3), st.floats(0.01, 1.0), st.floats(0, 2 * np.pi), st.integers(8, 200)
)
def test_polygonized_vertices_on_ellipse(a, ratio, rot, n):
    b = a * ratio
    p = polygonize_ellipse((0.3, 0.7), a, b, rot, n)
    c, s = np.cos(rot), np.sin(rot)
    local = (p - [0.3, 0.7]) @ np.array([[c, -s], [s, c]])
    assert np.allclose((local[:, 0] / a) ** 2 + (local[:, 1] / b) ** 2, 1.0, atol=1e-10)
    assert polygon_area(p) > 0


def test_classify_ties_and_codes(well_partition):
    pts = np.array(
        [[0.5, 0.5], [0.45, 0.5], [0.55, 0.55], [0.42, 0.5], [0.4, 0.5], [0.39, 0.5], [1.2, 0.5]]
    )
    assert well_partition.classify(pts).tolist() == [K0, K0, K0, RING, RING, K2, OUTSIDE]


def test_classify_is_a_partition(well_partition, rng):
    pts = rng.random((100_000, 2))
    code = well_partition.classify(pts)
    assert set(np.unique(code)) <= {K0, RING, K2}
    frac = np.bincount(code, minlength=3) / len(pts)
    assert frac == pytest.approx([0.01, 0.03, 0.96], abs=3e-3)


def test_gamma_segment_normals_point_outward(well_partition):
    start, end, n = well_partition.gamma_segments()
    mid = 0.5 * (start + end)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    assert np.all(well_partition.classify(mid + 1e-6 * n) == K2)
    assert np.all(well_partition.classify(mid - 1e-6 * n) == RING)


def test_polygon_roundtrip(tmp_path):
    p = polygonize_ellipse((0.5, 0.5), 0.2, 0.1, n_segments=16)
    write_polygon(tmp_path / "p.txt", p)
    assert np.array_equal(read_polygon(tmp_path / "p.txt"), p)
