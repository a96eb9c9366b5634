import math

import numpy as np
import pytest

from rotbox.coder import DeltaVector, angle_difference, angle_wrap_k, decode, encode
from rotbox.errors import DecodeOverflowError, ValidationError
from rotbox.geom import RotatedBox, canonicalize, skew_iou


class TestEncode:
    def test_pure_translation(self):
        anchor = RotatedBox(10, 20, 8, 32, -45)
        target = RotatedBox(14, 18, 8, 32, -45)
        d = encode(anchor, target)
        assert d.t_x == pytest.approx(4.0 / 8.0)
        assert d.t_y == pytest.approx(-2.0 / 32.0)
        assert d.t_w == 0.0
        assert d.t_h == 0.0
        assert d.t_theta == 0.0

    def test_log_size_ratios(self):
        anchor = RotatedBox(0, 0, 10, 40, -30)
        target = RotatedBox(0, 0, 20, 10, -30)
        d = encode(anchor, target)
        assert d.t_w == pytest.approx(math.log(2.0), rel=1e-12)
        assert d.t_h == pytest.approx(math.log(0.25), rel=1e-12)

    def test_angle_wrap_swaps_sides(self):
        # Nearly-vertical anchor vs nearly-horizontal target: the residual
        # wraps by +90 and the target sides swap roles.
        anchor = RotatedBox(0, 0, 10, 70, -85)
        target = RotatedBox(0, 0, 12, 60, -5)
        d = encode(anchor, target)
        assert d.t_theta == pytest.approx(-10.0)
        assert d.t_w == pytest.approx(math.log(60.0 / 10.0), rel=1e-12)
        assert d.t_h == pytest.approx(math.log(12.0 / 70.0), rel=1e-12)

    def test_residual_angle_is_small(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            anchor = canonicalize(*rng.uniform(-40, 40, 2), *rng.uniform(5, 60, 2), rng.uniform(-90, 0))
            target = canonicalize(*rng.uniform(-40, 40, 2), *rng.uniform(5, 60, 2), rng.uniform(-90, 0))
            d = encode(anchor, target)
            assert abs(d.t_theta) <= 45.0

    def test_wrap_choice(self):
        assert angle_wrap_k(-80.0) == 1
        assert angle_wrap_k(80.0) == -1
        assert angle_wrap_k(10.0) == 0
        assert angle_wrap_k(45.0) == 0
        assert angle_wrap_k(-45.0) == 0


class TestDecode:
    def test_inverts_encode(self):
        anchor = RotatedBox(5, -3, 12, 48, -70)
        target = RotatedBox(8, -1, 20, 30, -20)
        out = decode(anchor, encode(anchor, target))
        assert out.astuple() == pytest.approx(target.astuple(), abs=1e-9)

    def test_round_trip_random(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(2000):
            anchor = canonicalize(*rng.uniform(-40, 40, 2), *rng.uniform(5, 60, 2), rng.uniform(-90, 0))
            target = canonicalize(*rng.uniform(-40, 40, 2), *rng.uniform(5, 60, 2), rng.uniform(-90, 0))
            out = decode(anchor, encode(anchor, target))
            assert skew_iou(out, target) == pytest.approx(1.0, abs=1e-9)
            worst = max(worst, max(abs(a - b) for a, b in zip(out.astuple(), target.astuple())))
        assert worst < 1e-6

    def test_output_is_canonical(self):
        anchor = RotatedBox(0, 0, 10, 10, -88)
        out = decode(anchor, DeltaVector(0, 0, 0, 0, -10.0))
        assert -90.0 <= out.theta < 0.0

    def test_clamp_caps_growth(self):
        anchor = RotatedBox(0, 0, 10, 10, -45)
        out = decode(anchor, DeltaVector(0, 0, 20.0, 0, 0))
        assert out.w == pytest.approx(10.0 * math.exp(8.0), rel=1e-12)

    def test_overflow_raises_without_clamp(self):
        anchor = RotatedBox(0, 0, 10, 10, -45)
        with pytest.raises(DecodeOverflowError) as exc:
            decode(anchor, DeltaVector(0, 0, 20.0, 0, 0), clamp=None)
        assert exc.value.component == "t_w"
        with pytest.raises(DecodeOverflowError) as exc:
            decode(anchor, DeltaVector(0, 0, 0, -9.0, 0), clamp=None)
        assert exc.value.component == "t_h"

    def test_delta_vector_validation(self):
        with pytest.raises(ValidationError):
            DeltaVector(0, 0, float("nan"), 0, 0)


class TestAngleDifference:
    def test_wrapped_magnitude(self):
        assert angle_difference(-90.0, -5.0) == pytest.approx(5.0)
        assert angle_difference(-15.0, -30.0) == pytest.approx(15.0)
        assert angle_difference(-45.0, -45.0) == 0.0
        assert angle_difference(-89.0, -1.0) == pytest.approx(2.0)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b = rng.uniform(-90, 0, 2)
            assert angle_difference(a, b) == pytest.approx(angle_difference(b, a), abs=1e-12)
            assert 0.0 <= angle_difference(a, b) <= 45.0
