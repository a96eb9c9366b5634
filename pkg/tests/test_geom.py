import math

import numpy as np
import pytest

from rotbox.errors import InvalidBoxError, ShapeError
from rotbox.geom import (
    ConvexPolygon,
    HRect,
    RotatedBox,
    as_box_array,
    canonicalize,
    canonicalize_array,
    corners,
    corners_array,
    hrect,
    hrect_iou,
    intersect_convex,
    pairwise_skew_iou,
    shoelace_area,
    skew_iou,
    skew_iou_pairs,
)

from oracles import aligned_iou, grid_area, grid_iou, random_boxes


class TestRotatedBox:
    def test_validation(self):
        with pytest.raises(InvalidBoxError):
            RotatedBox(0, 0, -1, 10, -45)
        with pytest.raises(InvalidBoxError):
            RotatedBox(0, 0, 10, 0, -45)
        with pytest.raises(InvalidBoxError):
            RotatedBox(0, 0, float("nan"), 10, -45)
        with pytest.raises(InvalidBoxError):
            RotatedBox(float("inf"), 0, 10, 10, -45)

    def test_area(self):
        assert RotatedBox(3, 4, 10, 70, -30).area == 700.0


class TestCanonicalize:
    def test_wraps_below_range(self):
        assert canonicalize(0, 0, 70, 10, -95).astuple() == (0.0, 0.0, 10.0, 70.0, -5.0)

    def test_wraps_positive_with_swap(self):
        assert canonicalize(3, 4, 2, 6, 30).astuple() == (3.0, 4.0, 6.0, 2.0, -60.0)

    def test_identity_on_canonical(self):
        box = canonicalize(1, 2, 3, 4, -45.0)
        again = canonicalize(*box.astuple())
        assert again.astuple() == box.astuple()

    def test_boundary_minus_ninety(self):
        assert canonicalize(0, 0, 4, 8, -90).theta == -90.0
        # +90 is a half turn away from -90: same orientation, no swap.
        assert canonicalize(0, 0, 4, 8, 90).astuple() == (0.0, 0.0, 4.0, 8.0, -90.0)
        assert canonicalize(0, 0, 4, 8, 0).astuple() == (0.0, 0.0, 8.0, 4.0, -90.0)

    def test_half_turn_equivalence(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y = rng.uniform(-50, 50, 2)
            w, h = rng.uniform(1, 80, 2)
            t = rng.uniform(-720, 720)
            base = canonicalize(x, y, w, h, t)
            swapped = canonicalize(x, y, h, w, t + 90.0)
            half = canonicalize(x, y, w, h, t + 180.0)
            assert base.astuple() == pytest.approx(swapped.astuple(), abs=1e-9)
            assert base.astuple() == pytest.approx(half.astuple(), abs=1e-9)
            assert -90.0 <= base.theta < 0.0

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(1)
        raw = np.column_stack(
            [
                rng.uniform(-50, 50, (300, 2)),
                rng.uniform(1, 80, (300, 2)),
                rng.uniform(-720, 720, 300),
            ]
        )
        out = canonicalize_array(raw)
        for row, expect in zip(raw, out):
            assert canonicalize(*row).astuple() == tuple(expect)


class TestCorners:
    def test_axis_aligned(self):
        # theta = -90: width runs along -y, height along +x.
        quad = corners(RotatedBox(0, 0, 2, 4, -90)).vertices
        expect = {(-2.0, 1.0), (-2.0, -1.0), (2.0, -1.0), (2.0, 1.0)}
        assert {(round(x, 12), round(y, 12)) for x, y in quad} == expect

    def test_matches_rotation_matrix(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            x, y = rng.uniform(-50, 50, 2)
            w, h = rng.uniform(1, 60, 2)
            t = rng.uniform(-90, 0)
            got = corners(RotatedBox(x, y, w, h, t)).vertices
            u = (math.cos(math.radians(t)), math.sin(math.radians(t)))
            v = (-u[1], u[0])
            for (gx, gy), (sw, sh) in zip(got, ((1, 1), (-1, 1), (-1, -1), (1, -1))):
                ex = x + sw * w / 2 * u[0] + sh * h / 2 * v[0]
                ey = y + sw * w / 2 * u[1] + sh * h / 2 * v[1]
                assert (gx, gy) == pytest.approx((ex, ey), abs=1e-12)

    def test_array_matches_scalar(self):
        boxes = random_boxes(np.random.default_rng(3), 50)
        arr = corners_array(as_box_array(boxes))
        for row, quad in zip(boxes, arr):
            scalar = corners(RotatedBox(*row)).vertices
            assert np.allclose(quad, scalar, atol=0)

    def test_shoelace_of_corners_is_area(self):
        box = RotatedBox(5, -3, 11, 23, -37)
        assert shoelace_area(corners(box).vertices) == pytest.approx(box.area, rel=1e-12)


class TestIntersectConvex:
    def test_identical_squares(self):
        sq = corners(RotatedBox(0, 0, 2, 2, -90))
        out = intersect_convex(sq, sq)
        assert out.area == pytest.approx(4.0, abs=1e-12)

    def test_disjoint(self):
        a = corners(RotatedBox(0, 0, 2, 2, -90))
        b = corners(RotatedBox(10, 0, 2, 2, -90))
        assert intersect_convex(a, b).is_empty

    def test_edge_contact_is_empty(self):
        a = corners(RotatedBox(0, 0, 2, 2, -90))
        b = corners(RotatedBox(2, 0, 2, 2, -90))
        assert intersect_convex(a, b).is_empty

    def test_corner_contact_is_empty(self):
        a = corners(RotatedBox(0, 0, 2, 2, -90))
        b = corners(RotatedBox(2, 2, 2, 2, -90))
        assert intersect_convex(a, b).is_empty

    def test_plus_sign_overlap(self):
        # Two crossed 1x3 slabs: intersection is the unit square.
        a = corners(RotatedBox(0, 0, 3, 1, -90))
        b = corners(RotatedBox(0, 0, 1, 3, -90))
        out = intersect_convex(a, b)
        assert out.area == pytest.approx(1.0, abs=1e-12)

    def test_area_matches_strip_quadrature(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = RotatedBox(*random_boxes(rng, 1)[0])
            b = RotatedBox(*random_boxes(rng, 1)[0])
            out = intersect_convex(corners(a), corners(b))
            if out.is_empty:
                continue
            est = grid_area(out.vertices)
            assert out.area == pytest.approx(est, abs=max(1e-6, 1e-4 * out.area))

    def test_containment(self):
        outer = corners(RotatedBox(0, 0, 20, 20, -45))
        inner = corners(RotatedBox(0, 0, 2, 3, -70))
        assert intersect_convex(outer, inner).area == pytest.approx(6.0, abs=1e-9)
        assert intersect_convex(inner, outer).area == pytest.approx(6.0, abs=1e-9)


class TestSkewIou:
    def test_identical_is_one(self):
        box = RotatedBox(12.3, -4.5, 17.0, 53.0, -41.7)
        assert skew_iou(box, box) == 1.0

    def test_crossing_thin_boxes(self):
        # Two 10x70 hulls through the same center, 15 degrees apart.
        a = RotatedBox(0, 0, 10, 70, -90)
        b = RotatedBox(0, 0, 10, 70, -75)
        assert skew_iou(a, b) == pytest.approx(0.38, abs=0.02)

    def test_perpendicular_thin_boxes(self):
        a = RotatedBox(0, 0, 10, 70, -90)
        b = canonicalize(0, 0, 10, 70, 0)
        # intersection 10x10 = 100; union 700 + 700 - 100
        assert skew_iou(a, b) == pytest.approx(100.0 / 1300.0, rel=1e-12)

    def test_symmetry_is_bit_exact(self):
        rng = np.random.default_rng(5)
        a = random_boxes(rng, 200)
        b = random_boxes(rng, 200)
        fwd = skew_iou_pairs(a, b)
        rev = skew_iou_pairs(b, a)
        assert np.array_equal(fwd, rev)

    def test_scalar_matches_batch_bit_exact(self):
        rng = np.random.default_rng(6)
        a = random_boxes(rng, 100)
        b = random_boxes(rng, 100)
        batch = skew_iou_pairs(a, b)
        for i in range(100):
            assert skew_iou(RotatedBox(*a[i]), RotatedBox(*b[i])) == batch[i]

    def test_half_turn_invariance(self):
        a = RotatedBox(0, 0, 10, 70, -30)
        b = RotatedBox(5, 5, 20, 40, -60)
        a_alt = canonicalize(0, 0, 70, 10, -30 + 90)
        assert skew_iou(a, b) == skew_iou(a_alt, b)

    def test_against_grid_oracle(self):
        rng = np.random.default_rng(7)
        a = random_boxes(rng, 300)
        b = random_boxes(rng, 300)
        got = skew_iou_pairs(a, b)
        for i in range(300):
            assert got[i] == pytest.approx(grid_iou(tuple(a[i]), tuple(b[i])), abs=1e-2)

    def test_axis_aligned_matches_closed_form(self):
        rng = np.random.default_rng(8)
        a = random_boxes(rng, 200)
        b = random_boxes(rng, 200)
        a[:, 4] = -90.0
        b[:, 4] = -90.0
        got = skew_iou_pairs(a, b)
        for i in range(200):
            assert got[i] == pytest.approx(aligned_iou(tuple(a[i]), tuple(b[i])), abs=1e-9)

    def test_range(self):
        rng = np.random.default_rng(9)
        vals = skew_iou_pairs(random_boxes(rng, 500), random_boxes(rng, 500))
        assert np.all(vals >= 0.0)
        assert np.all(vals <= 1.0)

    def test_pairwise_matrix(self):
        rng = np.random.default_rng(10)
        a = random_boxes(rng, 7)
        b = random_boxes(rng, 11)
        matrix = pairwise_skew_iou(a, b)
        assert matrix.shape == (7, 11)
        for i in range(7):
            for j in range(11):
                assert matrix[i, j] == skew_iou(RotatedBox(*a[i]), RotatedBox(*b[j]))

    def test_pairwise_chunking_invariant(self):
        rng = np.random.default_rng(11)
        a = random_boxes(rng, 23)
        b = random_boxes(rng, 17)
        assert np.array_equal(pairwise_skew_iou(a, b), pairwise_skew_iou(a, b, chunk=64))

    def test_bad_array_shape(self):
        with pytest.raises(ShapeError):
            as_box_array(np.zeros((3, 4)))


class TestHRect:
    def test_validation(self):
        with pytest.raises(InvalidBoxError):
            HRect(1, 0, 0, 2)

    def test_circumscribes_rotated_box(self):
        box = RotatedBox(0, 0, 10, 70, -45)
        r = hrect(box)
        quad = corners(box).vertices
        assert r.xmin == pytest.approx(min(p[0] for p in quad))
        assert r.xmax == pytest.approx(max(p[0] for p in quad))
        s = 80 / math.sqrt(2) / 2
        assert r.xmax == pytest.approx(s, rel=1e-12)

    def test_iou(self):
        a = HRect(0, 0, 2, 2)
        assert hrect_iou(a, a) == 1.0
        assert hrect_iou(a, HRect(1, 0, 3, 2)) == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert hrect_iou(a, HRect(2, 0, 4, 2)) == 0.0
        assert hrect_iou(a, HRect(5, 5, 6, 6)) == 0.0


class TestConvexPolygon:
    def test_triangle_area(self):
        tri = ConvexPolygon(((0.0, 0.0), (4.0, 0.0), (0.0, 3.0)))
        assert tri.area == 6.0
        assert not tri.is_empty

    def test_empty(self):
        assert ConvexPolygon(()).is_empty
