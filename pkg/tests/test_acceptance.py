"""End-to-end acceptance checks, one test per guaranteed property.

Run with ``pytest -s tests/test_acceptance.py`` to see the one-line
``[PASS]/[FAIL]`` verdict per criterion.  Each test also enforces its own
wall-clock budget.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import (
    aligned_iou,
    conv2d_naive,
    greedy_nms_reference,
    grid_iou,
    random_boxes,
    roi_align_naive,
)
from rotbox.anchors import (
    AnchorConfig,
    classification_head_width,
    generate_pyramid_array,
    grids_for_image,
    regression_head_width,
)
from rotbox.bench import bench_iou, bench_nms
from rotbox.coder import DeltaVector, decode, encode
from rotbox.dfpn import dfpn_forward, random_weights
from rotbox.evaluator import (
    CIRCUMSCRIBED,
    ROTATED,
    Detection,
    EvalConfig,
    evaluate,
    pr_curve,
)
from rotbox.geom import (
    HRect,
    RotatedBox,
    canonicalize,
    hrect_bounds_array,
    hrect_iou_pairs,
    pairwise_skew_iou,
    skew_iou,
    skew_iou_pairs,
)
from rotbox.loss import LossConfig, LossEntry, multitask_loss, smooth_l1
from rotbox.matcher import (
    IGNORE,
    NEGATIVE,
    POSITIVE,
    AssignerConfig,
    Assignment,
    SamplerConfig,
    assign,
    sample,
)
from rotbox.nms import ScoredBox, rotated_nms
from rotbox.roi_align import roi_align
from rotbox.tensor import conv2d, upsample_nearest
from rotbox.tiler import TileSpec, merge_scene, plan_tiles, to_scene_coords


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


def _boxes(params) -> list[RotatedBox]:
    return [RotatedBox(*row) for row in params]


def test_thin_pair_overlap_anchor():
    with criterion("thin 10x70 pair 15 deg apart -> IoU 0.38 +/- 0.02 in < 1 ms"):
        a = RotatedBox(0.0, 0.0, 10.0, 70.0, -90.0)
        b = RotatedBox(0.0, 0.0, 10.0, 70.0, -75.0)
        skew_iou(a, b)  # warm-up outside the timed call
        t0 = time.perf_counter()
        value = skew_iou(a, b)
        elapsed = time.perf_counter() - t0
        assert abs(value - 0.38) <= 0.02
        assert value == pytest.approx(0.3778871017248284, abs=1e-12)
        assert elapsed < 1e-3


def test_skew_iou_oracle_suite():
    with criterion(
        "skew IoU on 1e4 pairs vs 1e6-cell rasterization oracle (1e-2)"
        " and closed-form axis-aligned (1e-9) in < 60 s"
    ):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        n = 10_000
        pa = random_boxes(rng, n)
        pb = random_boxes(rng, n)
        got = skew_iou_pairs(pa, pb)
        worst = 0.0
        for i in range(n):
            worst = max(worst, abs(got[i] - grid_iou(pa[i], pb[i])))
        assert worst <= 1e-2

        qa = random_boxes(rng, n)
        qb = random_boxes(rng, n)
        qa[:, 4] = -90.0
        qb[:, 4] = -90.0
        got_aligned = skew_iou_pairs(qa, qb)
        for i in range(n):
            assert abs(got_aligned[i] - aligned_iou(qa[i], qb[i])) <= 1e-9
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0


def test_rotated_nms_against_brute_force():
    with criterion(
        "rotated NMS == full-matrix greedy reference on 1000 random sets"
        " (exact keep order) in < 60 s"
    ):
        t0 = time.perf_counter()
        rng = np.random.default_rng(7)
        thresholds = (0.1, 0.3, 0.5, 0.7)
        for case in range(1000):
            n = int(rng.integers(10, 201))
            params = random_boxes(rng, n, extent=120.0, size_lo=8.0, size_hi=60.0)
            scores = rng.uniform(0.0, 1.0, n)
            ii, jj = np.triu_indices(n, k=1)
            vals = skew_iou_pairs(params[ii], params[jj])
            matrix = np.zeros((n, n))
            matrix[ii, jj] = vals
            matrix[jj, ii] = vals
            np.fill_diagonal(matrix, 1.0)
            thr = thresholds[case % len(thresholds)]
            expect = greedy_nms_reference(params, scores, list(range(n)), matrix, thr)
            items = [
                ScoredBox(box, float(s), i)
                for i, (box, s) in enumerate(zip(_boxes(params), scores))
            ]
            got = rotated_nms(items, thr, pre_topk=None, post_topk=None)
            assert got == expect, f"case {case} (n={n}, thr={thr})"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0


def test_anchor_lattice_counts():
    with criterion(
        "anchor counts: 48 per location, head widths 240/96,"
        " 261888 anchors at 256x256 in < 1 s"
    ):
        t0 = time.perf_counter()
        config = AnchorConfig()
        assert config.anchors_per_location == 48
        assert regression_head_width(config) == 240
        assert classification_head_width(config) == 96
        grids = grids_for_image(config, 256, 256)
        total = sum(gh * gw for _, (gh, gw) in grids) * config.anchors_per_location
        assert total == 261_888
        assert generate_pyramid_array(config, grids).shape == (261_888, 5)
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0


def test_coder_round_trip():
    with criterion(
        "decode(encode) identity on 1e4 anchor/target pairs incl. wrapped"
        " angles (1e-6 per field) in < 5 s"
    ):
        t0 = time.perf_counter()
        rng = np.random.default_rng(11)
        n = 10_000
        pa = random_boxes(rng, n)
        pt = random_boxes(rng, n)
        # force a slice of extreme angle differences so the wrap-and-swap
        # path is definitely exercised
        pa[:500, 4] = rng.uniform(-90.0, -80.0, 500)
        pt[:500, 4] = rng.uniform(-10.0, -0.01, 500)
        wrapped = 0
        for i in range(n):
            anchor = RotatedBox(*pa[i])
            target = RotatedBox(*pt[i])
            if abs(target.theta - anchor.theta) > 45.0:
                wrapped += 1
            back = decode(anchor, encode(anchor, target))
            assert abs(back.x - target.x) <= 1e-6
            assert abs(back.y - target.y) <= 1e-6
            assert abs(back.w - target.w) <= 1e-6
            assert abs(back.h - target.h) <= 1e-6
            assert abs(back.theta - target.theta) <= 1e-6
        assert wrapped >= 500
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0


def _loss_oracle(entries, lam):
    cls_ref = 0.0
    reg_ref = 0.0
    n_pos = 0
    for e in entries:
        cls_ref += -math.log(max(e.probs[e.label], 1e-12))
        if e.is_positive:
            n_pos += 1
            for name in ("t_x", "t_y", "t_w", "t_h"):
                reg_ref += smooth_l1(getattr(e.pred, name) - getattr(e.target, name))
            reg_ref += smooth_l1((e.pred.t_theta - e.target.t_theta) / 90.0)
    return cls_ref / max(len(entries), 1) + lam * reg_ref / max(n_pos, 1)


def test_loss_properties():
    with criterion(
        "loss: smooth-L1 branches meet at 0.5, 64-entry batches match the"
        " scalar oracle (1e-9), lambda scaling and positive gating hold"
    ):
        assert smooth_l1(1.0) == 0.5
        assert smooth_l1(-1.0) == 0.5
        assert 0.5 * 1.0**2 == 0.5 == abs(1.0) - 0.5  # both branch formulas

        rng = np.random.default_rng(5)
        for _ in range(10):
            entries = []
            for _ in range(64):
                p = float(rng.uniform(0.02, 0.98))
                positive = bool(rng.uniform() < 0.3)
                pred = DeltaVector(*rng.uniform(-3, 3, 4), rng.uniform(-45, 45))
                target = DeltaVector(*rng.uniform(-3, 3, 4), rng.uniform(-45, 45))
                entries.append(
                    LossEntry(
                        probs=(p, 1.0 - p),
                        label=int(positive),
                        pred=pred,
                        target=target,
                        is_positive=positive,
                    )
                )
            out = multitask_loss(entries, LossConfig(lam=1.0))
            assert out.total == pytest.approx(_loss_oracle(entries, 1.0), abs=1e-9)

        # lambda scales exactly the regression share of the total
        base = multitask_loss(entries, LossConfig(lam=1.0))
        for lam in (0.0, 0.5, 2.0, 10.0):
            scaled = multitask_loss(entries, LossConfig(lam=lam))
            assert scaled.cls_loss == base.cls_loss
            assert scaled.reg_loss == base.reg_loss
            assert scaled.total == base.cls_loss / base.n_cls + lam * base.reg_loss / base.n_reg

        # negatives carry no regression signal, however wild their deltas
        wild = DeltaVector(100.0, -100.0, 5.0, -5.0, 44.0)
        gated = entries + [LossEntry((0.9, 0.1), 0, pred=wild, target=None)]
        assert multitask_loss(gated).reg_loss == multitask_loss(entries).reg_loss


def _angle_diff(a: float, b: float) -> float:
    return abs((b - a + 45.0) % 90.0 - 45.0)


def test_matcher_rules_and_coverage():
    with criterion(
        "matcher: threshold/angle/ignore rule examples, argmax coverage"
        " over 100 scenes, 512 @ 1:1 sampling with deficit fill"
    ):
        config = AssignerConfig()  # pos 0.5 / neg 0.2 / angle 15

        # each example pairs the probe anchor with an exact-match decoy so
        # the argmax override belongs to the decoy, exposing the pure rule
        def probe(gt, anchor):
            labels = assign([gt, anchor], [gt], config)
            return labels[1].label

        gt = RotatedBox(100.0, 100.0, 40.0, 40.0, -45.0)
        pos_anchor = RotatedBox(103.0, 100.0, 40.0, 40.0, -35.0)  # ~0.6 IoU, 10 deg
        neg_anchor = RotatedBox(103.0, 100.0, 40.0, 40.0, -25.0)  # ~0.6 IoU, 20 deg
        ign_anchor = RotatedBox(100.0, 118.0, 40.0, 40.0, -40.0)  # ~0.35 IoU, 5 deg
        assert skew_iou(gt, pos_anchor) > 0.5
        assert _angle_diff(gt.theta, pos_anchor.theta) == pytest.approx(10.0)
        assert probe(gt, pos_anchor) == POSITIVE
        assert skew_iou(gt, neg_anchor) > 0.5
        assert _angle_diff(gt.theta, neg_anchor.theta) == pytest.approx(20.0)
        assert probe(gt, neg_anchor) == NEGATIVE
        assert 0.2 < skew_iou(gt, ign_anchor) < 0.5
        assert _angle_diff(gt.theta, ign_anchor.theta) == pytest.approx(5.0)
        assert probe(gt, ign_anchor) == IGNORE

        # every gt that overlaps anything gets its best anchor labeled positive
        rng = np.random.default_rng(23)
        for _ in range(100):
            pa = random_boxes(rng, 80, extent=300.0, size_lo=15.0, size_hi=70.0)
            pg = random_boxes(rng, int(rng.integers(1, 9)), extent=300.0)
            labels = assign(_boxes(pa), _boxes(pg), config)
            iou = pairwise_skew_iou(pa, pg)
            for j in range(pg.shape[0]):
                if iou[:, j].max() > 0.0:
                    best_anchor = int(iou[:, j].argmax())
                    assert labels[best_anchor].label == POSITIVE

        # balanced sampling and deficit fill
        def pool(n_pos, n_neg):
            return (
                [Assignment(POSITIVE, 0, 0.9)] * n_pos
                + [Assignment(NEGATIVE, None, 0.0)] * n_neg
            )

        cfg = SamplerConfig(batch_size=512, pos_fraction=0.5)
        pos, neg = sample(pool(600, 600), cfg, seed=0)
        assert (len(pos), len(neg)) == (256, 256)
        pos, neg = sample(pool(50, 10_000), cfg, seed=0)
        assert (len(pos), len(neg)) == (50, 462)
        assert len(set(pos)) == len(pos) and len(set(neg)) == len(neg)


def test_pyramid_structure():
    with criterion(
        "pyramid: 256-channel outputs at strides 4..64 for input sides"
        " {64,128,256}, coarse perturbation reaches the finest level,"
        " conv/upsample match loop oracles (1e-5) in < 30 s"
    ):
        t0 = time.perf_counter()
        rng = np.random.default_rng(31)
        weights = random_weights(64, channels=256, seed=0)
        strides = {2: 4, 3: 8, 4: 16, 5: 32, 6: 64}
        for side in (64, 128, 256):
            features = {
                level: rng.standard_normal(
                    (64, side // strides[level], side // strides[level])
                ).astype(np.float32)
                for level in (2, 3, 4, 5)
            }
            outputs = dfpn_forward(features, weights)
            assert sorted(outputs) == [2, 3, 4, 5, 6]
            for level, out in outputs.items():
                assert out.shape == (256, side // strides[level], side // strides[level])

        # dense dependency: a bump in the coarsest backbone map must move
        # every pyramid output, including the finest
        side = 64
        features = {
            level: rng.standard_normal(
                (64, side // strides[level], side // strides[level])
            ).astype(np.float32)
            for level in (2, 3, 4, 5)
        }
        base = dfpn_forward(features, weights)
        bumped = dict(features)
        bumped[5] = features[5].copy()
        bumped[5][7, 0, 1] += 5.0
        moved = dfpn_forward(bumped, weights)
        for level in (2, 3, 4, 5, 6):
            assert np.abs(moved[level] - base[level]).max() > 1e-4

        # primitive ops against the scalar loop oracles
        x = rng.standard_normal((3, 7, 6)).astype(np.float32)
        k = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        np.testing.assert_allclose(conv2d(x, k, b), conv2d_naive(x, k, b), atol=1e-5)
        up = upsample_nearest(x, 3)
        for c in range(3):
            for i in range(up.shape[1]):
                for j in range(up.shape[2]):
                    assert up[c, i, j] == x[c, i // 3, j // 3]
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0


def test_roi_align_exactness_and_equivariance():
    with criterion(
        "roi align: constant and affine-ramp maps pooled exactly (1e-5),"
        " translation equivariance over 100 integer shifts"
    ):
        rng = np.random.default_rng(41)
        const = np.full((2, 20, 20), -3.25, dtype=np.float32)
        out = roi_align(const, HRect(2.5, 3.5, 15.0, 17.0), 1.0, 7, 7)
        np.testing.assert_allclose(out, -3.25, atol=1e-5)

        h, w = 24, 24
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        ramp = (0.75 * xs - 1.25 * ys + 2.0)[None].astype(np.float32)
        roi = HRect(3.0, 4.0, 19.0, 18.0)
        out_h, out_w = 4, 5
        pooled = roi_align(ramp, roi, 1.0, out_h, out_w)
        bw = (roi.xmax - roi.xmin) / out_w
        bh = (roi.ymax - roi.ymin) / out_h
        for bi in range(out_h):
            for bj in range(out_w):
                xc = roi.xmin + (bj + 0.5) * bw
                yc = roi.ymin + (bi + 0.5) * bh
                assert pooled[0, bi, bj] == pytest.approx(0.75 * xc - 1.25 * yc + 2.0, abs=1e-5)

        for _ in range(100):
            core = rng.standard_normal((2, 8, 8)).astype(np.float32)
            dx, dy = (int(v) for v in rng.integers(-3, 4, 2))
            pad = 6
            base = np.zeros((2, 20, 20), dtype=np.float32)
            base[:, pad : pad + 8, pad : pad + 8] = core
            moved = np.zeros((2, 20, 20), dtype=np.float32)
            moved[:, pad + dy : pad + dy + 8, pad + dx : pad + dx + 8] = core
            x0 = pad + rng.uniform(0.0, 2.0)
            y0 = pad + rng.uniform(0.0, 2.0)
            roi = HRect(x0, y0, x0 + rng.uniform(3.0, 6.0), y0 + rng.uniform(3.0, 6.0))
            shifted = HRect(roi.xmin + dx, roi.ymin + dy, roi.xmax + dx, roi.ymax + dy)
            a = roi_align(base, roi, 1.0, 3, 3)
            b = roi_align(moved, shifted, 1.0, 3, 3)
            np.testing.assert_allclose(b, a, atol=1e-5)

        # cross-check the vectorized pooling against the all-loops version
        feature = rng.standard_normal((3, 12, 10)).astype(np.float32)
        got = roi_align(feature, HRect(1.0, 2.0, 31.0, 22.0), 4.0, 5, 3, 2)
        want = roi_align_naive(feature, 1.0, 2.0, 31.0, 22.0, 4.0, 5, 3, 2)
        np.testing.assert_allclose(got, want, atol=1e-5)


def _sq(x, y, side=20.0):
    return RotatedBox(x, y, side, side, -90.0)


def test_evaluator_fixture_and_criteria():
    with criterion(
        "evaluator: fixture counts tp=2 fp=2 fn=1 with P=0.5 R=2/3,"
        " PR recall monotone, circumscribed recall >= rotated"
    ):
        gts = {"img": [_sq(50, 50), _sq(200, 50), _sq(350, 50)]}
        dets = [
            Detection(_sq(50, 50), 0.9, "img"),
            Detection(_sq(52, 50), 0.8, "img"),
            Detection(_sq(204, 50), 0.7, "img"),
            Detection(_sq(500, 300), 0.6, "img"),
        ]
        out = evaluate(dets, gts, EvalConfig(iou_threshold=0.5, score_threshold=0.5))
        assert (out.tp, out.fp, out.fn) == (2, 2, 1)
        assert out.precision == 0.5
        assert out.recall == 2 / 3

        rng = np.random.default_rng(53)
        thresholds = [i / 20 for i in range(21)]
        for _ in range(20):
            pg = random_boxes(rng, int(rng.integers(1, 10)), extent=400.0)
            pd = random_boxes(rng, int(rng.integers(0, 15)), extent=400.0)
            scene_gts = {"s": _boxes(pg)}
            scene_dets = [
                Detection(b, float(rng.uniform()), "s") for b in _boxes(pd)
            ]
            curve = pr_curve(scene_dets, scene_gts, EvalConfig(), thresholds)
            recalls = [r for _, _, r in curve]
            assert all(a >= b for a, b in zip(recalls, recalls[1:]))

        # a slender detection at the right spot but wrong angle is only
        # recovered under the circumscribed-rectangle criterion
        gt = RotatedBox(100, 100, 10, 70, -45)
        near = [Detection(RotatedBox(100, 100, 10, 70, -65), 0.9, "img")]
        exact = [Detection(gt, 0.9, "img")]
        for fixture in (near, exact):
            rot = evaluate(fixture, {"img": [gt]}, EvalConfig(criterion=ROTATED))
            circ = evaluate(fixture, {"img": [gt]}, EvalConfig(criterion=CIRCUMSCRIBED))
            assert circ.recall >= rot.recall
        assert evaluate(near, {"img": [gt]}, EvalConfig(criterion=ROTATED)).recall == 0.0
        assert (
            evaluate(near, {"img": [gt]}, EvalConfig(criterion=CIRCUMSCRIBED)).recall == 1.0
        )


def test_tiler_coverage_and_merge():
    with criterion(
        "tiler: 16393x16393 -> 589 windows covering every pixel, local/scene"
        " round trip identity, cross-tile duplicates merged"
    ):
        spec = TileSpec(scene_h=16393, scene_w=16393)
        windows = plan_tiles(spec)
        assert len(windows) == 589
        xs = sorted({(w.xmin, w.xmax) for w in windows})
        ys = sorted({(w.ymin, w.ymax) for w in windows})
        assert len(xs) * len(ys) == len(windows)  # full Cartesian grid
        for spans, scene in ((ys, spec.scene_h), (xs, spec.scene_w)):
            assert spans[0][0] == 0
            reach = spans[0][1]
            for lo, hi in spans[1:]:
                assert lo <= reach
                reach = max(reach, hi)
            assert reach == scene

        rng = np.random.default_rng(61)
        for window in windows[:: 97]:
            local = Detection(
                RotatedBox(*rng.uniform(10, 500, 2), *rng.uniform(8, 60, 2), rng.uniform(-90, 0)),
                float(rng.uniform()),
            )
            scene = to_scene_coords(local, window)
            assert scene.box.x - window.xmin == pytest.approx(local.box.x, abs=1e-9)
            assert scene.box.y - window.ymin == pytest.approx(local.box.y, abs=1e-9)
            assert (scene.box.w, scene.box.h, scene.box.theta) == (
                local.box.w,
                local.box.h,
                local.box.theta,
            )

        two = plan_tiles(TileSpec(scene_h=1140, scene_w=1000))
        per_tile = [
            [Detection(RotatedBox(500.0, 590.0, 12.0, 80.0, -40.0), 0.7)],
            [Detection(RotatedBox(500.0, 50.0, 12.0, 80.0, -40.0), 0.9)],
        ]
        merged = merge_scene(per_tile, two)
        assert len(merged) == 1
        assert merged[0].score == 0.9


def test_bench_floors():
    with criterion("bench: IoU >= 1e5 pairs/s and NMS on 1e4 boxes in < 2 s"):
        iou_stats = bench_iou()
        assert iou_stats["pairs_per_second"] >= 1e5
        nms_stats = bench_nms()
        assert nms_stats["boxes"] == 10_000
        assert nms_stats["seconds"] < 2.0
