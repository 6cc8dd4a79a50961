import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nitsche_hybrid.exceptions import CoverageGap, UntaggedBoundary
from nitsche_hybrid.geometry import DEFAULT_DELTA, build_partition, default_shape
from nitsche_hybrid.interface import (
    GammaEdges,
    GammaSegments,
    build_interface,
    check_assumption_B,
    collect_gamma_edges,
    intersect_interfaces,
    weighted_average_and_jump,
)
from nitsche_hybrid.mesh import Triangulation, build_mesh_pair, structured_rectangle


def _unit_segment():
    return GammaSegments(
        start=np.array([[0.0, 0.0]]), end=np.array([[1.0, 0.0]]), normal=np.array([[0.0, 1.0]])
    )


def _edges(breaks, diameter, segments=None):
    breaks = np.asarray(breaks, dtype=float)
    n = len(breaks) - 1
    return GammaEdges(
        segments=segments or _unit_segment(),
        segment=np.zeros(n, dtype=np.int64),
        s0=breaks[:-1],
        s1=breaks[1:],
        triangle=np.arange(n),
        diameter=np.full(n, diameter),
    )


def test_nested_edge_pair():
    seg = GammaSegments(np.array([[0.0, 0.0]]), np.array([[0.1, 0.0]]), np.array([[0.0, 1.0]]))
    fine = _edges([0.0, 0.05, 0.1], 0.05, seg)
    coarse = _edges([0.0, 0.1], 0.1, seg)
    itf = intersect_interfaces(fine, coarse)
    assert len(itf) == 2
    assert np.allclose(itf.lengths, 0.05)
    assert np.allclose(itf.H_e, 0.1)
    assert np.allclose(itf.h_e, 0.05)
    assert check_assumption_B(itf)


def test_non_nested_piece():
    fine = _edges([0.0, 0.40, 0.45, 1.0], 0.05)
    coarse = _edges([0.0, 0.375, 0.5, 1.0], 0.125)
    itf = intersect_interfaces(fine, coarse)
    both = (itf.fine_triangle == 1) & (itf.coarse_triangle == 1)
    assert both.sum() == 1
    k = np.flatnonzero(both)[0]
    assert itf.p0[k] == pytest.approx([0.40, 0.0])
    assert itf.p1[k] == pytest.approx([0.45, 0.0])
    assert not check_assumption_B(itf)


@given(
    st.lists(st.floats(0.01, 0.99), min_size=1, max_size=30, unique=True),
    st.lists(st.floats(0.01, 0.99), min_size=1, max_size=10, unique=True),
)
def test_pieces_cover_gamma(fine_pts, coarse_pts):
    fine = _edges(np.concatenate([[0.0], np.sort(fine_pts), [1.0]]), 0.01)
    coarse = _edges(np.concatenate([[0.0], np.sort(coarse_pts), [1.0]]), 0.1)
    itf = intersect_interfaces(fine, coarse)
    assert abs(itf.lengths.sum() - 1.0) < 1e-10
    # every piece lies inside its fine and its coarse edge
    s0, s1 = itf.p0[:, 0], itf.p1[:, 0]
    assert np.all(s0 >= fine.s0[itf.fine_triangle] - 1e-14)
    assert np.all(s1 <= fine.s1[itf.fine_triangle] + 1e-14)
    assert np.all(s0 >= coarse.s0[itf.coarse_triangle] - 1e-14)
    assert np.all(s1 <= coarse.s1[itf.coarse_triangle] + 1e-14)


def test_gap_raises():
    fine = GammaEdges(
        segments=_unit_segment(),
        segment=np.zeros(2, dtype=np.int64),
        s0=np.array([0.0, 0.6]),
        s1=np.array([0.5, 1.0]),
        triangle=np.arange(2),
        diameter=np.full(2, 0.5),
    )
    with pytest.raises(CoverageGap):
        intersect_interfaces(fine, _edges([0.0, 1.0], 1.0))


@pytest.mark.parametrize("defect", ["well", "channel", "ellipse"])
def test_misaligned_meshes_cover_gamma(defect):
    part = build_partition(default_shape(defect), DEFAULT_DELTA[defect])
    pair = build_mesh_pair(part, 2.0**-6 * 0.9, 2.0**-4 * 1.13)
    itf = build_interface(pair.inner, pair.outer, part)
    assert abs(itf.lengths.sum() - part.gamma_length) < 1e-10
    assert np.all(itf.lengths > 0)
    assert np.all(np.abs(np.linalg.norm(itf.normal, axis=1) - 1) < 1e-14)


def test_normal_points_from_k1_to_k2(well_partition, well_pair):
    itf = build_interface(well_pair.inner, well_pair.outer, well_partition)
    mid = 0.5 * (itf.p0 + itf.p1)
    out = mid + 1e-6 * itf.normal
    from nitsche_hybrid.geometry import K2

    assert np.all(well_partition.classify(out) == K2)


def test_dyadic_well_satisfies_assumption_B():
    # K1 is [0.4, 0.6]^2: H = 0.05 and h = H / 8 subdivide it exactly
    part = build_partition(default_shape("well"), DEFAULT_DELTA["well"])
    pair = build_mesh_pair(part, 0.05 / 8, 0.05)
    itf = build_interface(pair.inner, pair.outer, part)
    assert check_assumption_B(itf)


def test_shifted_fine_mesh_breaks_assumption_B():
    h, H = 1 / 24, 1 / 3
    fine = _edges(np.concatenate([[0.0], np.arange(1, 24) * h + h / 3, [1.0]]), h)
    coarse = _edges(np.arange(4) * H, H)
    assert not check_assumption_B(intersect_interfaces(fine, coarse))
    aligned = _edges(np.arange(25) * h, h)
    assert check_assumption_B(intersect_interfaces(aligned, coarse))


def test_untagged_gamma_edge_raises(well_partition, well_pair):
    bare = Triangulation(well_pair.inner.vertices, well_pair.inner.triangles)
    with pytest.raises(UntaggedBoundary):
        collect_gamma_edges(bare, well_partition)


def test_mesh_away_from_gamma_has_no_edges(well_partition):
    m = structured_rectangle(0.0, 0.1, 0.0, 0.1, 2, 2)
    edges = collect_gamma_edges(m, well_partition)
    assert len(edges) == 0


def test_csv_dump(tmp_path, well_partition, well_pair):
    itf = build_interface(well_pair.inner, well_pair.outer, well_partition)
    path = tmp_path / "itf.csv"
    itf.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "y0", "x1", "y1", "h_e", "H_e", "omega1"]
    data = np.array(rows[1:], dtype=float)
    assert len(data) == len(itf)
    assert np.array_equal(data[:, 0], itf.p0[:, 0])
    assert np.array_equal(data[:, 6], itf.omega1)


def test_weights_sum_to_one(well_partition, well_pair):
    itf = build_interface(well_pair.inner, well_pair.outer, well_partition)
    assert np.allclose(itf.omega1 + itf.omega2, 1.0, atol=1e-15)
    assert np.all(itf.omega1 < itf.omega2)  # the fine side gets the smaller weight


def test_weighted_average_example():
    lower, upper, jump = weighted_average_and_jump(2.0, 4.0, 0.25, 0.75)
    assert lower == pytest.approx(3.5)
    assert upper == pytest.approx(2.5)
    assert jump == pytest.approx(-2.0)


def test_product_jump_identity_bulk():
    # [vw] = {v}_w [w] + [v] {w}^w for any weights summing to one
    rng = np.random.default_rng(7)
    v1, v2, w1, w2 = rng.uniform(-10, 10, size=(4, 10_000))
    om = rng.uniform(0, 1, 10_000)
    v_low, _, v_jump = weighted_average_and_jump(v1, v2, om, 1 - om)
    _, w_up, w_jump = weighted_average_and_jump(w1, w2, om, 1 - om)
    lhs = v_low * w_jump - (v1 * w1 - v2 * w2)
    rhs = -v_jump * w_up
    scale = 1 + np.abs(v1 * w1) + np.abs(v2 * w2)
    assert np.max(np.abs(lhs - rhs) / scale) < 1e-13


@settings(max_examples=200)
@given(
    st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3),
    st.floats(0.0, 1.0),
)
def test_product_jump_identity(v1, v2, w1, w2, om):
    v_low, _, v_jump = weighted_average_and_jump(v1, v2, om, 1 - om)
    _, w_up, w_jump = weighted_average_and_jump(w1, w2, om, 1 - om)
    scale = 1 + abs(v1 * w1) + abs(v2 * w2) + abs(v1 * w2) + abs(v2 * w1)
    assert abs(v_low * w_jump - (v1 * w1 - v2 * w2) + v_jump * w_up) <= 1e-13 * scale
