import numpy as np
import pytest

from vitalstream.errors import DivergedLoss, EmptyTrainingSet, ShapeMismatch
from vitalstream.nnet import (
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    Network,
    ReLU,
    cross_entropy,
    softmax,
    softmax_xent_grad,
    train,
)
from vitalstream.nnet.kernels import BACKEND, reference


# --- finite-difference oracle -------------------------------------------------

def loss_of(net, x, labels):
    return cross_entropy(softmax(net.logits(x, train=False)), labels)


def analytic_grads(net, x, labels):
    net.zero_grads()
    probs = softmax(net.logits(x, train=True))
    net.backward(softmax_xent_grad(probs, labels))
    return [p.grad.copy() for p in net.params()]


def numeric_grads(net, x, labels, h=1e-6):
    grads = []
    for p in net.params():
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_of(net, x, labels)
            flat[i] = orig - h
            down = loss_of(net, x, labels)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def tiny_net(rng, in_len=12):
    conv1 = Conv1D(1, 3, 3, 2, rng=rng)
    pool = MaxPool1D(2, 2)
    conv2 = Conv1D(3, 4, 3, 1, rng=rng)
    length = conv2.out_length(pool.out_length(conv1.out_length(in_len)))
    return Network([conv1, ReLU(), pool, conv2, ReLU(), Flatten(),
                    Dense(4 * length, 6, rng=rng), ReLU(), Dense(6, 5, rng=rng)])


class TestGradients:
    def test_full_stack_matches_finite_differences(self, rng):
        net = tiny_net(rng)
        x = rng.normal(size=(4, 1, 12)) + 0.1  # keep clear of ReLU kinks
        labels = rng.integers(0, 5, size=4)
        err = max_rel_error(analytic_grads(net, x, labels),
                            numeric_grads(net, x, labels))
        assert err <= 1e-4

    def test_dense_only(self, rng):
        net = Network([Flatten(), Dense(8, 7, rng=rng), ReLU(),
                       Dense(7, 3, rng=rng)])
        x = rng.normal(size=(5, 1, 8))
        labels = rng.integers(0, 3, size=5)
        err = max_rel_error(analytic_grads(net, x, labels),
                            numeric_grads(net, x, labels))
        assert err <= 1e-4

    def test_strided_conv_padding_cases(self, rng):
        # odd/even lengths exercise asymmetric same-padding
        for in_len in (7, 8, 11):
            conv = Conv1D(2, 3, 5, 2, rng=rng)
            net = Network([conv, Flatten(),
                           Dense(3 * conv.out_length(in_len), 4, rng=rng)])
            x = rng.normal(size=(3, 2, in_len))
            labels = rng.integers(0, 4, size=3)
            err = max_rel_error(analytic_grads(net, x, labels),
                                numeric_grads(net, x, labels))
            assert err <= 1e-4, f"in_len={in_len}"

    def test_input_gradient_matches(self, rng):
        net = tiny_net(rng)
        x = rng.normal(size=(2, 1, 12))
        labels = np.array([0, 3])
        probs = softmax(net.logits(x, train=True))
        dx = net.backward(softmax_xent_grad(probs, labels))
        h = 1e-6
        num = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + h
            up = loss_of(net, x, labels)
            x[idx] = orig - h
            down = loss_of(net, x, labels)
            x[idx] = orig
            num[idx] = (up - down) / (2 * h)
        denom = np.maximum(np.abs(dx) + np.abs(num), 1e-8)
        assert float(np.max(np.abs(dx - num) / denom)) <= 1e-4


class TestSoftmax:
    def test_rows_sum_to_one(self, rng):
        probs = softmax(rng.normal(size=(10, 5)) * 10)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_shift_invariant_argmax(self, rng):
        logits = rng.normal(size=(6, 5))
        shifted = logits + 123.456
        assert np.array_equal(np.argmax(softmax(logits), axis=1),
                              np.argmax(softmax(shifted), axis=1))
        np.testing.assert_allclose(softmax(logits), softmax(shifted),
                                   atol=1e-12)


class TestMaxPool:
    def test_gradient_routed_to_argmax_only(self):
        x = np.array([[[1.0, 3.0, 2.0, 0.5, 7.0, 7.0 - 1e-9]]])
        pool = MaxPool1D(2, 2)
        y = pool.forward(x)
        np.testing.assert_allclose(y, [[[3.0, 2.0, 7.0]]])
        dy = np.array([[[1.0, 10.0, 100.0]]])
        dx = pool.backward(dy)
        np.testing.assert_allclose(dx, [[[0.0, 1.0, 10.0, 0.0, 100.0, 0.0]]])

    def test_ceil_mode_truncated_window(self):
        x = np.array([[[4.0, 1.0, 5.0]]])
        pool = MaxPool1D(2, 2)
        y = pool.forward(x)
        np.testing.assert_allclose(y, [[[4.0, 5.0]]])  # last window is lone sample


class TestTraining:
    def test_zero_learning_rate_freezes_weights(self, rng):
        net = tiny_net(rng)
        before = [p.value.copy() for p in net.params()]
        x = rng.normal(size=(8, 1, 12))
        labels = rng.integers(0, 5, size=8)
        train(net, x, labels, epochs=1, batch_size=4, learning_rate=0.0,
              momentum=0.0, rng=rng)
        for b, p in zip(before, net.params()):
            np.testing.assert_array_equal(b, p.value)

    def test_empty_training_set(self, rng):
        net = tiny_net(rng)
        with pytest.raises(EmptyTrainingSet):
            train(net, np.empty((0, 1, 12)), np.empty(0, dtype=int), epochs=1)

    def test_diverged_loss_detected(self, rng):
        net = tiny_net(rng)
        for p in net.params():
            p.value[...] = 1e300  # all logits overflow to +inf -> nan loss
        x = np.abs(rng.normal(size=(4, 1, 12))) + 0.1
        with pytest.raises(DivergedLoss):
            with np.errstate(all="ignore"):
                train(net, x, np.zeros(4, dtype=int), epochs=1,
                      learning_rate=1.0)

    def test_deterministic_under_seed(self, rng):
        x = rng.normal(size=(16, 1, 12))
        labels = rng.integers(0, 5, size=16)
        nets = []
        for _ in range(2):
            net = tiny_net(np.random.default_rng(99))
            train(net, x, labels, epochs=3, batch_size=4,
                  learning_rate=0.01, rng=np.random.default_rng(7))
            nets.append([p.value.copy() for p in net.params()])
        for a, b in zip(*nets):
            np.testing.assert_array_equal(a, b)


class TestSerialization:
    def test_roundtrip_bit_identical(self, rng, tmp_path):
        net = tiny_net(rng)
        path = tmp_path / "model.npz"
        net.save(path)
        back = Network.load(path)
        for a, b in zip(net.params(), back.params()):
            np.testing.assert_array_equal(a.value, b.value)
        x = rng.normal(size=(3, 1, 12))
        np.testing.assert_array_equal(net.logits(x), back.logits(x))
        assert back.extra == net.extra


class TestShapeChecks:
    def test_conv_rejects_wrong_channels(self, rng):
        conv = Conv1D(2, 3, 3, rng=rng)
        with pytest.raises(ShapeMismatch):
            conv.forward(rng.normal(size=(1, 1, 10)))

    def test_dense_rejects_wrong_features(self, rng):
        dense = Dense(4, 2, rng=rng)
        with pytest.raises(ShapeMismatch):
            dense.forward(rng.normal(size=(1, 5)))


@pytest.mark.skipif(BACKEND != "compiled",
                    reason="compiled kernels not built")
class TestBackendEquivalence:
    def test_conv_and_pool_agree_with_reference(self, rng):
        from vitalstream.nnet.kernels import _fast
        for stride in (1, 2, 3):
            x = np.ascontiguousarray(rng.normal(size=(3, 4, 23)))
            w = np.ascontiguousarray(rng.normal(size=(6, 4, 5)))
            b = rng.normal(size=6)
            y_ref = reference.conv1d_forward(x, w, b, stride)
            y_fast = _fast.conv1d_forward(x, w, b, stride)
            np.testing.assert_allclose(y_fast, y_ref, atol=1e-12)
            dy = np.ascontiguousarray(rng.normal(size=y_ref.shape))
            for g_ref, g_fast in zip(reference.conv1d_backward(dy, x, w, stride),
                                     _fast.conv1d_backward(dy, x, w, stride)):
                np.testing.assert_allclose(g_fast, g_ref, atol=1e-12)
        for size, stride, length in ((2, 2, 10), (2, 2, 11), (3, 2, 11)):
            x = np.ascontiguousarray(rng.normal(size=(2, 3, length)))
            y_ref, i_ref = reference.maxpool1d_forward(x, size, stride)
            y_fast, i_fast = _fast.maxpool1d_forward(x, size, stride)
            np.testing.assert_array_equal(i_fast, i_ref)
            np.testing.assert_allclose(y_fast, y_ref)
            dy = np.ascontiguousarray(rng.normal(size=y_ref.shape))
            np.testing.assert_allclose(
                _fast.maxpool1d_backward(dy, i_fast, length),
                reference.maxpool1d_backward(dy, i_ref, length))
