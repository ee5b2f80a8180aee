import numpy as np
import pytest

from mmmt.errors import LabelError
from mmmt.ordinal import (CoralHead, coral_forward, coral_forward_backward,
                          coral_loss, coral_loss_grad, coral_predict,
                          extend_labels, extend_labels_batch)
from mmmt.rng import RngState
from mmmt.tensor_core import Parameter, grad_check, sigmoid


def make_head(w, b, k):
    return CoralHead(w=Parameter("w", np.asarray(w, dtype=np.float64)),
                     b=Parameter("b", np.asarray(b, dtype=np.float64)),
                     num_classes=k)


class TestExtendLabels:
    def test_min_rank(self):
        assert extend_labels(0, 4).tolist() == [0, 0, 0]

    def test_middle_rank(self):
        assert extend_labels(2, 4).tolist() == [1, 1, 0]

    def test_max_rank(self):
        assert extend_labels(3, 4).tolist() == [1, 1, 1]

    def test_out_of_range(self):
        with pytest.raises(LabelError):
            extend_labels(4, 4)
        with pytest.raises(LabelError):
            extend_labels(-1, 4)

    def test_prefix_and_popcount_all_k(self):
        for k in range(2, 9):
            for r in range(k):
                bits = extend_labels(r, k)
                assert (np.diff(bits) <= 0).all()      # non-increasing prefix
                assert int(bits.sum()) == r             # popcount round trip

    def test_batch_matches_scalar(self):
        ranks = np.array([0, 3, 1, 2])
        batch = extend_labels_batch(ranks, 4)
        for row, r in zip(batch, ranks):
            assert np.array_equal(row, extend_labels(int(r), 4))


class TestCoralForward:
    def test_probs_from_biases_at_g_zero(self):
        head = make_head(np.zeros(3), [2.0, 0.0, -2.0], 4)
        logits = coral_forward(np.zeros((1, 3)), head)
        probs = sigmoid(logits)[0]
        assert probs == pytest.approx([0.8807970779778823, 0.5,
                                       0.11920292202211755], abs=1e-12)

    def test_all_half_at_zero(self):
        head = make_head(np.zeros(4), np.zeros(3), 4)
        probs = sigmoid(coral_forward(RngState(0).gaussian(8).reshape(2, 4), head))
        assert np.allclose(probs, 0.5)

    def test_descending_biases_give_nonincreasing_probs(self):
        for seed in range(10):
            rng = RngState(seed)
            head = make_head(rng.gaussian(5), np.sort(rng.gaussian(3))[::-1].copy(), 4)
            probs = sigmoid(coral_forward(rng.gaussian(15).reshape(3, 5), head))
            assert (np.diff(probs, axis=1) <= 0).all()


class TestCoralLoss:
    def test_saturated_correct(self):
        logits = np.array([[20.0, 20.0, -20.0]])
        labels = extend_labels_batch(np.array([2]), 4)
        assert coral_loss(logits, labels) < 1e-6

    def test_zero_logits_closed_form(self):
        logits = np.zeros((1, 3))
        labels = np.array([[1.0, 1.0, 0.0]])
        assert coral_loss(logits, labels) == pytest.approx(3 * np.log(2), abs=1e-12)

    def test_nonnegative(self):
        for seed in range(10):
            rng = RngState(seed)
            logits = rng.gaussian(12).reshape(4, 3) * 3
            ranks = np.array([0, 1, 2, 3])
            assert coral_loss(logits, extend_labels_batch(ranks, 4)) >= 0.0

    def test_gradient_vs_finite_differences(self):
        rng = RngState(21)
        pooled = rng.gaussian(12).reshape(3, 4)
        head = make_head(rng.gaussian(4), rng.gaussian(3), 4)
        labels = extend_labels_batch(np.array([1, 0, 3]), 4)

        def f():
            return coral_loss(coral_forward(pooled, head), labels)

        logits = coral_forward(pooled, head)
        dlogits = coral_loss_grad(logits, labels)
        head.w.grad[...] = 0
        head.b.grad[...] = 0
        coral_forward_backward(dlogits, pooled, head)
        assert grad_check(f, [head.w, head.b], eps=1e-5) < 1e-5

    def test_single_sample_descent(self):
        # loss decreases monotonically under small gradient steps
        rng = RngState(33)
        pooled = rng.gaussian(4).reshape(1, 4)
        head = make_head(rng.gaussian(4), rng.gaussian(3), 4)
        labels = extend_labels_batch(np.array([2]), 4)
        prev = coral_loss(coral_forward(pooled, head), labels)
        for _ in range(50):
            head.w.grad[...] = 0
            head.b.grad[...] = 0
            dlogits = coral_loss_grad(coral_forward(pooled, head), labels)
            coral_forward_backward(dlogits, pooled, head)
            head.w.value -= 0.05 * head.w.grad
            head.b.value -= 0.05 * head.b.grad
            cur = coral_loss(coral_forward(pooled, head), labels)
            assert cur < prev
            prev = cur


class TestCoralPredict:
    def test_half_not_counted(self):
        # probs (0.8808, 0.5, 0.1192) -> logits (+2, 0, -2): rank 1
        assert coral_predict(np.array([[2.0, 0.0, -2.0]])).tolist() == [1]

    def test_all_negative(self):
        assert coral_predict(np.array([[-1.0, -2.0, -3.0]])).tolist() == [0]

    def test_all_positive(self):
        assert coral_predict(np.array([[1.0, 2.0, 3.0]])).tolist() == [3]

    def test_invariant_to_positive_scaling(self):
        rng = RngState(44)
        logits = rng.gaussian(30).reshape(10, 3)
        base = coral_predict(logits)
        for c in (0.1, 2.0, 17.5):
            assert np.array_equal(coral_predict(logits * c), base)
