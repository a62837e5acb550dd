import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from echolab.errors import NoInteriorPixels, ShapeMismatch
from echolab.objective import (
    LossWeights,
    MetricReport,
    combine_losses,
    dice_loss,
    iou,
    mse_loss,
    per_sample_metrics,
    pit_height_loss,
    resolve_height_orientation,
    summarize,
    total_loss,
)
from echolab.tensor import core
from echolab.tensor.core import Tensor
from oracles import count_dice, count_iou, finite_difference

masks = arrays(np.uint8, (8, 8), elements=st.integers(0, 1))
heights = arrays(np.float64, (16,), elements=st.floats(0, 1))
binary_h = arrays(np.uint8, (16,), elements=st.integers(0, 1))


class TestMse:
    def test_examples(self):
        assert mse_loss(np.ones(3), np.ones(3)) == 0
        assert mse_loss(np.ones(3) + 1, np.ones(3)) == 1
        assert mse_loss(np.array([0.5, 0.0]), np.array([1.0, 0.0])) == 0.125

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mse_loss(np.ones(3), np.ones(4))


class TestDiceIou:
    def test_dice_examples(self):
        t = np.array([1, 1, 0, 0])
        assert dice_loss(t, t) == 0
        assert dice_loss(np.array([0, 0, 1, 1]), t) == 1
        assert dice_loss(np.array([1, 0, 1, 0]), t) == 0.5
        assert dice_loss(np.zeros(4), np.zeros(4)) == 0

    def test_iou_examples(self):
        t = np.zeros(8)
        t[:4] = 1
        p = np.zeros(8)
        p[2:6] = 1
        assert iou(p, t) == pytest.approx(1 / 3)
        assert iou(t, t) == 1
        assert iou(1 - t, t) == 0
        assert iou(np.zeros(4), np.zeros(4)) == 1

    @given(masks, masks)
    def test_match_counting_oracle(self, p, t):
        assert dice_loss(p, t) == pytest.approx(count_dice(p, t), abs=1e-15)
        assert iou(p, t) == pytest.approx(count_iou(p, t), abs=1e-15)

    @given(masks, masks)
    def test_dice_iou_extremes_agree(self, p, t):
        d, j = dice_loss(p, t), iou(p, t)
        assert (d == 0) == (j == 1)
        assert (d == 1) == (j == 0)

    def test_batched_is_mean(self, rng):
        P = (rng.uniform(size=(5, 8, 8)) > 0.5).astype(int)
        T = (rng.uniform(size=(5, 8, 8)) > 0.5).astype(int)
        assert iou(P, T, batched=True) == pytest.approx(np.mean([count_iou(p, t) for p, t in zip(P, T)]))
        assert dice_loss(P, T, batched=True) == pytest.approx(np.mean([count_dice(p, t) for p, t in zip(P, T)]))

    def test_tensor_dice_matches_numpy(self, rng):
        p = rng.uniform(size=(3, 8, 8))
        t = (rng.uniform(size=(3, 8, 8)) > 0.5).astype(float)
        t[1] = 0
        p[1] = 0
        got = dice_loss(Tensor(p, dtype=np.float64), t, batched=True)
        assert float(got.data) == pytest.approx(dice_loss(p, t, batched=True))


class TestPit:
    def test_examples(self):
        assert pit_height_loss(np.array([1.0, 0, 0]), np.array([0.0, 0, 1])) == (0.0, True)
        assert mse_loss(np.array([1.0, 0, 0]), np.array([0.0, 0, 1])) == pytest.approx(2 / 3)
        pal = np.array([0.0, 1, 1, 0])
        pred = np.array([0.2, 0.9, 0.4, 0.1])
        assert pit_height_loss(pred, pal)[0] == pytest.approx(mse_loss(pred, pal))

    @given(heights, binary_h)
    def test_flip_invariant(self, pred, t):
        assert pit_height_loss(pred, t)[0] == pit_height_loss(pred, t[::-1])[0]

    def test_batched_tensor(self, rng):
        pred = rng.uniform(size=(4, 16))
        t = (rng.uniform(size=(4, 16)) > 0.5).astype(float)
        loss, flip = pit_height_loss(Tensor(pred, dtype=np.float64), t)
        ref = [pit_height_loss(p, tt) for p, tt in zip(pred, t)]
        assert float(loss.data) == pytest.approx(np.mean([r[0] for r in ref]))
        assert list(flip) == [r[1] for r in ref]


class TestTotalLoss:
    def test_weighted_sum(self):
        assert combine_losses(0.1, 0.5, 0.2, LossWeights(0.3, 1.0)) == pytest.approx(0.45)

    def test_perfect_and_height_only(self):
        Y = np.zeros((1, 4, 4))
        Y[0, 1:3, 1:3] = 1
        H = np.array([[0, 1, 1, 0]], dtype=float)
        assert total_loss(Y, H, Y, H) == 0
        # a zero target is shifted by exactly 1 in every height pixel
        assert total_loss(Y, np.ones((1, 4)), Y, np.zeros((1, 4))) == pytest.approx(1.0)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(-0.1, 1.0)

    @given(st.integers(0, 10_000))
    def test_non_negative(self, seed):
        r = np.random.default_rng(seed)
        P, T = r.uniform(size=(2, 4, 4)), (r.uniform(size=(2, 4, 4)) > 0.5).astype(float)
        ph, th = r.uniform(size=(2, 6)), (r.uniform(size=(2, 6)) > 0.5).astype(float)
        assert total_loss(P, ph, T, th) >= 0

    def test_gradient_matches_finite_differences(self, rng):
        P = rng.uniform(0.1, 0.9, size=(2, 4, 4))
        ph = rng.uniform(0.1, 0.9, size=(2, 6))
        T = (rng.uniform(size=(2, 4, 4)) > 0.5).astype(float)
        th = np.array([[0, 1, 1, 1, 0, 0], [0, 0, 1, 1, 1, 1]], dtype=float)
        tp, th_ = Tensor(P, requires_grad=True, dtype=np.float64), Tensor(ph, requires_grad=True, dtype=np.float64)
        total_loss(tp, th_, T, th).backward()
        num_p = finite_difference(lambda a: total_loss(a, ph, T, th), P.copy())
        num_h = finite_difference(lambda a: total_loss(P, a, T, th), ph.copy())
        np.testing.assert_allclose(tp.grad, num_p, rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(th_.grad, num_h, rtol=1e-5, atol=1e-8)


class TestOrientation:
    def test_counting_example(self):
        v = np.zeros(40)
        v[14:34] = 1
        out, floor = resolve_height_orientation(v)
        np.testing.assert_array_equal(out, v)
        assert floor == 14

    def test_tie_keeps_orientation(self):
        v = np.zeros(10)
        v[3:8] = 1  # centre 5: two below, two above
        out, _ = resolve_height_orientation(v)
        np.testing.assert_array_equal(out, v)

    def test_mirrored_prediction_flipped(self):
        v = np.zeros(40)
        v[6:26] = 1  # 14 below centre, 5 above: floor must be the upper side
        out, floor = resolve_height_orientation(v)
        np.testing.assert_array_equal(out, v[::-1])
        assert floor == 14

    def test_all_interior_above_centre_kept(self):
        v = np.zeros(10)
        v[6:9] = 1  # zero below the centre, so the low end is already the floor side
        out, _ = resolve_height_orientation(v)
        np.testing.assert_array_equal(out, v)

    def test_empty(self):
        with pytest.raises(NoInteriorPixels):
            resolve_height_orientation(np.zeros(8))


class TestReporting:
    def test_perfect_model(self, rng):
        Y = (rng.uniform(size=(3, 8, 8)) > 0.5).astype(np.uint8)
        H = np.array([[0, 0, 0, 1, 1, 1, 1, 0]] * 3, dtype=np.uint8)
        m = per_sample_metrics(Y.astype(float), H.astype(float), Y, H)
        assert np.all(m["iou_2d"] == 1) and np.all(m["iou_3d"] == 1)
        assert np.all(m["mse_lw"] == 0) and np.all(m["mse_h"] == 0)

    def test_constant_half_model(self):
        Y = np.zeros((1, 4, 4), dtype=np.uint8)
        Y[0, :2, :2] = 1
        H = np.array([[0, 1, 1, 1]], dtype=np.uint8)
        m = per_sample_metrics(np.full((1, 4, 4), 0.5), np.full((1, 4), 0.5), Y, H)
        # 0.5 binarizes to all-interior: IOU = interior / total pixels
        assert m["iou_2d"][0] == pytest.approx(4 / 16)
        assert m["iou_3d"][0] == pytest.approx(4 * 3 / (16 * 4))
        assert m["mse_lw"][0] == pytest.approx(0.25)
        assert m["mse_h"][0] == pytest.approx(0.25)

    def test_summarize_and_json(self):
        metrics = {k: np.array([1.0, 0.5, 0.0]) for k in ("iou_2d", "iou_3d", "mse_lw", "mse_h")}
        rep = summarize(metrics, ["L", "L", "T"], ["LOS", "NLOS", "NLOS"])
        assert isinstance(rep, MetricReport)
        assert rep.by_family["L"]["count"] == 2 and rep.by_family["T"]["count"] == 1
        assert rep.by_visibility["NLOS"]["iou_2d"] == pytest.approx(0.25)
        d = json.loads(rep.to_json())
        assert set(d) >= {"iou_2d", "iou_3d", "mse_lw", "mse_h", "by_family", "by_visibility"}
