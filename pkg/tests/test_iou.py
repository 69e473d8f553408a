import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posecomp.evaluation.iou import (
    convex_hull,
    iou_2d,
    iou_3d,
    iou_bev,
    iou_matrix,
    polygon_area,
    polygon_clip,
)
from posecomp.exceptions import DegenerateBox, InvalidRect
from posecomp.geometry import Box3D, RigidPose, compose_r3d, rot_axis, transform_box

import oracles


def corners(center, dims, rot):
    return Box3D(np.asarray(center, float), dims, np.asarray(rot, float)).corners()


def random_box(rng, tilt=0.0):
    center = rng.uniform(-2, 2, 3)
    dims = (rng.uniform(1.3, 1.8), rng.uniform(1.4, 1.9), rng.uniform(3.2, 4.6))
    yaw = rng.uniform(-math.pi, math.pi)
    roll, pitch = rng.uniform(-tilt, tilt, 2)
    return corners(center, dims, compose_r3d(roll, yaw, pitch))


SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)


class TestRect:
    def test_identical(self):
        assert iou_2d([0, 0, 2, 3], [0, 0, 2, 3]) == 1.0

    def test_disjoint(self):
        assert iou_2d([0, 0, 1, 1], [2, 2, 3, 3]) == 0.0

    def test_half_overlap(self):
        assert iou_2d([0, 0, 1, 1], [0.5, 0, 1.5, 1]) == pytest.approx(1 / 3, abs=1e-15)

    def test_touching(self):
        assert iou_2d([0, 0, 1, 1], [1, 0, 2, 1]) == 0.0

    @pytest.mark.parametrize("rect", [[1, 0, 1, 1], [0, 2, 1, 1], [0, 0, np.nan, 1]])
    def test_degenerate(self, rect):
        with pytest.raises(InvalidRect):
            iou_2d(rect, [0, 0, 1, 1])


class TestPolygons:
    def test_self_clip(self):
        poly = convex_hull(np.array([[0, 0], [3, 1], [2, 4], [-1, 2]], float))
        assert polygon_area(polygon_clip(poly, poly)) == pytest.approx(polygon_area(poly),
                                                                       abs=1e-12)

    def test_disjoint(self):
        assert len(polygon_clip(SQUARE, SQUARE + 5)) == 0

    def test_octagon(self):
        c = 0.5
        rot = np.array([[math.cos(math.pi / 4), -math.sin(math.pi / 4)],
                        [math.sin(math.pi / 4), math.cos(math.pi / 4)]])
        diamond = (SQUARE - c) @ rot.T + c
        area = polygon_area(polygon_clip(SQUARE, diamond))
        assert area == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-12)
        mc = oracles.monte_carlo_area(SQUARE, diamond, seed=3)
        assert abs(mc - area) < 3e-3

    def test_hull_ccw(self):
        pts = np.array([[1, 1], [0, 0], [2, 0], [2, 2], [0, 2], [1, 0]], float)
        hull = convex_hull(pts)
        assert len(hull) == 4 and polygon_area(hull) == pytest.approx(4.0)

    def test_clip_bounded_by_inputs(self, rng):
        for _ in range(50):
            a = convex_hull(rng.uniform(-1, 1, (6, 2)))
            b = convex_hull(rng.uniform(-1, 1, (6, 2)))
            inter = polygon_area(polygon_clip(a, b))
            assert -1e-12 <= inter <= min(polygon_area(a), polygon_area(b)) + 1e-12


class TestBev:
    def test_identical(self):
        c = corners([0, 0, 10], (1.5, 1.6, 4), np.eye(3))
        assert iou_bev(c, c) == 1.0

    def test_height_ignored(self):
        a = corners([0, 0, 10], (1.5, 1.6, 4), rot_axis("y", 0.4))
        b = corners([0, -3, 10], (0.7, 1.6, 4), rot_axis("y", 0.4))
        assert iou_bev(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_crossed(self):
        a = corners([0, 0, 0], (1, 2, 4), np.eye(3))
        b = corners([0, 0, 0], (1, 2, 4), rot_axis("y", math.pi / 2))
        assert iou_bev(a, b) == pytest.approx(1 / 3, abs=1e-12)
        area = oracles.monte_carlo_area(a[[0, 1, 2, 3]][:, [0, 2]][::-1],
                                        b[[0, 1, 2, 3]][:, [0, 2]][::-1], seed=5)
        assert area == pytest.approx(4.0, abs=0.03)

    def test_degenerate(self):
        flat = corners([0, 0, 0], (1, 1, 2), np.eye(3))
        flat[:, 2] = 0.0
        with pytest.raises(DegenerateBox):
            iou_bev(flat, corners([0, 0, 0], (1, 1, 2), np.eye(3)))


class TestIou3d:
    def test_identical_is_exactly_one(self, rng):
        for tilt in (0.0, 0.1):
            c = random_box(rng, tilt)
            assert iou_3d(c, c) == 1.0

    def test_half_length_shift(self):
        a = corners([0, 0, 0], (1.5, 1.6, 4), rot_axis("y", 0.7))
        shift = rot_axis("y", 0.7) @ np.array([2.0, 0, 0])
        b = corners(shift, (1.5, 1.6, 4), rot_axis("y", 0.7))
        assert iou_3d(a, b) == pytest.approx(1 / 3, abs=1e-12)
        assert iou_3d(a, b, method="exact") == pytest.approx(1 / 3, abs=1e-12)

    def test_vertical_separation(self):
        a = corners([0, 0, 0], (1.5, 1.6, 4), np.eye(3))
        b = corners([0, 2, 0], (1.5, 1.6, 4), np.eye(3))
        assert iou_3d(a, b) == 0.0

    def test_symmetric(self, rng):
        for tilt in (0.0, 0.09):
            for _ in range(30):
                a, b = random_box(rng, tilt), random_box(rng, tilt)
                assert iou_3d(a, b) == iou_3d(b, a)
                assert iou_bev(a, b) == iou_bev(b, a)

    def test_exact_matches_prism_formula_for_upright(self, rng):
        for _ in range(30):
            a, b = random_box(rng), random_box(rng)
            assert iou_3d(a, b, "exact") == pytest.approx(iou_3d(a, b), abs=1e-9)

    def test_rigid_invariance(self, rng):
        pose = RigidPose(compose_r3d(0.04, 0.8, -0.03), [1.0, -0.5, 3.0])
        for tilt in (0.0, 0.08):
            for _ in range(20):
                ca, cb = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
                ra = compose_r3d(*rng.uniform(-tilt, tilt, 1), rng.uniform(-3, 3), *rng.uniform(-tilt, tilt, 1))
                rb = compose_r3d(*rng.uniform(-tilt, tilt, 1), rng.uniform(-3, 3), *rng.uniform(-tilt, tilt, 1))
                a, b = Box3D(ca, (1.5, 1.6, 4), ra), Box3D(cb, (1.4, 1.7, 3.8), rb)
                before = iou_3d(a.corners(), b.corners())
                after = iou_3d(transform_box(a, pose).corners(), transform_box(b, pose).corners())
                assert after == pytest.approx(before, abs=1e-9)

    def test_bounded_by_bev_for_equal_heights(self, rng):
        for _ in range(30):
            a, b = random_box(rng), random_box(rng)
            assert 0.0 <= iou_3d(a, b) <= 1.0
            assert 0.0 <= iou_bev(a, b) <= 1.0

    @pytest.mark.parametrize("tilt", [0.0, math.radians(5)])
    def test_monte_carlo(self, tilt):
        rng = np.random.default_rng(99)
        for k in range(5):
            a, b = random_box(rng, tilt), random_box(rng, tilt)
            ref = oracles.monte_carlo_iou_3d(a, b, seed=k)
            assert abs(iou_3d(a, b) - ref) <= 0.01

    def test_envelope_is_looser_than_exact(self):
        a = corners([0, 0, 0], (1.5, 1.6, 4), compose_r3d(0.0, 0.0, math.radians(5)))
        b = corners([0.3, 0, 0.4], (1.5, 1.6, 4), np.eye(3))
        exact = iou_3d(a, b, "exact")
        ref = oracles.monte_carlo_iou_3d(a, b, seed=1)
        assert abs(exact - ref) <= 0.01
        assert iou_3d(a, b, "envelope") != pytest.approx(exact, abs=1e-6)

    def test_unknown_method(self):
        c = corners([0, 0, 0], (1, 1, 1), np.eye(3))
        with pytest.raises(ValueError):
            iou_3d(c, c + 0.1, method="voxel")


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1),
       st.floats(-3, 3), st.floats(-3, 3))
def test_iou_in_unit_interval(yaw, roll, pitch, dx, dz):
    a = corners([0, 0, 0], (1.5, 1.6, 4), compose_r3d(roll, yaw, pitch))
    b = corners([dx, 0, dz], (1.5, 1.6, 4), np.eye(3))
    v = iou_3d(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou_3d(b, a)


def test_iou_matrix_skips_far_pairs():
    near = corners([0, 0, 10], (1.5, 1.6, 4), np.eye(3))
    far = corners([50, 0, 10], (1.5, 1.6, 4), np.eye(3))
    calls = []

    def fn(a, b):
        calls.append(1)
        return iou_3d(a, b)

    m = iou_matrix([near, far], [near], fn)
    np.testing.assert_array_equal(m, [[1.0], [0.0]])
    assert len(calls) == 1
    assert iou_matrix([], [near], fn).shape == (0, 1)
