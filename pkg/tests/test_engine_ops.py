import numpy as np
import pytest

from evocae.engine import backends
from evocae.engine.gradcheck import check_op, finite_difference, max_rel_error
from evocae.engine.ops import (
    conv2d,
    conv2d_backward,
    mse_loss,
    relu,
    relu_backward,
    skip_add,
    skip_add_backward,
    tconv2d,
    tconv2d_backward,
)
from evocae.errors import ShapeError

BACKENDS = backends.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = backends.active_backend()
    backends.set_backend(request.param)
    yield request.param
    backends.set_backend(previous)


def naive_conv(x, w, bias, stride):
    """Independent oracle: direct cross-correlation with zero padding (k-1)/2."""
    b, ci, h, wd = x.shape
    co, _, k, _ = w.shape
    pad = (k - 1) // 2
    oh = (h - 1) // stride + 1
    ow = (wd - 1) // stride + 1
    out = np.zeros((b, co, oh, ow), dtype=x.dtype)
    for bi in range(b):
        for o in range(co):
            for y in range(oh):
                for xx in range(ow):
                    acc = 0.0
                    for c in range(ci):
                        for kh in range(k):
                            for kw in range(k):
                                iy = y * stride - pad + kh
                                ix = xx * stride - pad + kw
                                if 0 <= iy < h and 0 <= ix < wd:
                                    acc += x[bi, c, iy, ix] * w[o, c, kh, kw]
                    out[bi, o, y, xx] = acc + bias[o]
    return out


class TestConvForward:
    def test_ones_window_sums(self, backend):
        x = np.ones((1, 1, 3, 3))
        w = np.ones((1, 1, 3, 3))
        out = conv2d(x, w, np.zeros(1), 1)
        expected = np.array([[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]])
        np.testing.assert_array_equal(out[0, 0], expected)

    def test_stride2_identity_sampling(self, backend):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out = conv2d(x, np.ones((1, 1, 1, 1)), np.zeros(1), 2)
        np.testing.assert_array_equal(out[0, 0], [[0.0, 2.0], [8.0, 10.0]])

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("kernel", [1, 3, 5])
    def test_matches_naive_oracle(self, backend, stride, kernel):
        rng = np.random.default_rng(kernel * 10 + stride)
        x = rng.normal(size=(2, 3, 7, 6))
        w = rng.normal(size=(4, 3, kernel, kernel))
        bias = rng.normal(size=4)
        got = conv2d(x, w, bias, stride)
        np.testing.assert_allclose(got, naive_conv(x, w, bias, stride), atol=1e-12)

    def test_channel_mismatch(self, backend):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1), 1)


class TestTconvForward:
    def test_scatter_semantics(self, backend):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        out = tconv2d(x, np.ones((1, 1, 1, 1)), np.zeros(1), 2)
        expected = np.zeros((4, 4))
        expected[0, 0], expected[0, 2], expected[2, 0], expected[2, 2] = 1, 2, 3, 4
        np.testing.assert_array_equal(out[0, 0], expected)

    def test_stride1_preserves_shape(self, backend):
        x = np.random.default_rng(0).normal(size=(2, 3, 5, 5))
        w = np.random.default_rng(1).normal(size=(3, 4, 3, 3))
        assert tconv2d(x, w, np.zeros(4), 1).shape == (2, 4, 5, 5)

    @pytest.mark.parametrize("kernel", [1, 3, 5])
    def test_stride2_doubles(self, backend, kernel):
        x = np.random.default_rng(2).normal(size=(1, 2, 6, 5))
        w = np.random.default_rng(3).normal(size=(2, 3, kernel, kernel))
        assert tconv2d(x, w, np.zeros(3), 2).shape == (1, 3, 12, 10)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_adjoint_of_conv(self, backend, stride):
        # <conv(x), y> == <x, tconv(y)> for matching geometries.
        rng = np.random.default_rng(4)
        x = rng.normal(size=(1, 2, 8, 8))
        w = rng.normal(size=(3, 2, 3, 3))
        y_shape = conv2d(x, w, np.zeros(3), stride).shape
        y = rng.normal(size=y_shape)
        lhs = np.sum(conv2d(x, w, np.zeros(3), stride) * y)
        rhs = np.sum(x * tconv2d(y, w, np.zeros(2), stride))
        assert abs(lhs - rhs) < 1e-9


class TestBackendsAgree:
    @pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
    @pytest.mark.parametrize("stride", [1, 2])
    def test_forward_and_backward_match(self, stride):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(2, 3, 9, 7))
        w = rng.normal(size=(4, 3, 5, 5))
        bias = rng.normal(size=4)
        results = {}
        for name in BACKENDS:
            backends.set_backend(name)
            y = conv2d(x, w, bias, stride)
            g = rng.normal(size=y.shape) if name == BACKENDS[0] else results[BACKENDS[0]][1]
            gx, gw, gb = conv2d_backward(x, w, g, stride)
            results[name] = (y, g, gx, gw, gb)
        backends.set_backend(backends._initial())
        a, b = results[BACKENDS[0]], results[BACKENDS[1]]
        for left, right in zip(a, b):
            np.testing.assert_allclose(left, right, rtol=1e-10, atol=1e-12)


class TestGradients:
    @pytest.mark.parametrize("stride", [1, 2])
    def test_conv_gradcheck(self, backend, stride):
        rng = np.random.default_rng(stride)
        x = rng.normal(size=(2, 2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=3)
        probe = rng.normal(size=conv2d(x, w, bias, stride).shape)

        def forward():
            return float(np.sum(conv2d(x, w, bias, stride) * probe))

        def backward():
            return conv2d_backward(x, w, probe, stride)

        assert check_op(forward, backward, [x, w, bias]) < 1e-6

    @pytest.mark.parametrize("stride", [1, 2])
    def test_tconv_gradcheck(self, backend, stride):
        rng = np.random.default_rng(10 + stride)
        x = rng.normal(size=(2, 3, 5, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=2)
        probe = rng.normal(size=tconv2d(x, w, bias, stride).shape)

        def forward():
            return float(np.sum(tconv2d(x, w, bias, stride) * probe))

        def backward():
            return tconv2d_backward(x, w, probe, stride)

        assert check_op(forward, backward, [x, w, bias]) < 1e-6

    def test_relu_gradcheck(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=(2, 3, 4, 4))
        x[np.abs(x) < 0.05] += 0.1  # keep clear of the kink
        probe = rng.normal(size=x.shape)

        def forward():
            return float(np.sum(relu(x) * probe))

        def backward():
            return [relu_backward(x, probe)]

        assert check_op(forward, backward, [x]) < 1e-6

    def test_skip_add_gradcheck(self):
        rng = np.random.default_rng(21)
        a = rng.normal(size=(2, 3, 4, 4))
        b = rng.normal(size=(2, 3, 4, 4))
        probe = rng.normal(size=a.shape)

        def forward():
            return float(np.sum(skip_add(a, b) * probe))

        def backward():
            return list(skip_add_backward(probe))

        assert check_op(forward, backward, [a, b]) < 1e-6

    def test_mse_gradcheck(self):
        rng = np.random.default_rng(22)
        pred = rng.normal(size=(2, 3, 4, 4))
        target = rng.normal(size=(2, 3, 4, 4))

        def forward():
            return mse_loss(pred, target)[0]

        def backward():
            return [mse_loss(pred, target)[1]]

        assert check_op(forward, backward, [pred]) < 1e-8


class TestElementwiseOps:
    def test_relu_values(self):
        np.testing.assert_array_equal(
            relu(np.array([-1.0, 0.0, 2.0])), np.array([0.0, 0.0, 2.0])
        )

    def test_relu_derivative_zero_at_zero(self):
        grad = relu_backward(np.array([0.0, -1.0, 1.0]), np.ones(3))
        np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])

    def test_skip_add_identity(self):
        x = np.random.default_rng(0).normal(size=(1, 2, 3, 3))
        np.testing.assert_array_equal(skip_add(x, np.zeros_like(x)), x)

    def test_skip_add_shape_mismatch(self):
        with pytest.raises(ShapeError):
            skip_add(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)))

    def test_mse_zero_when_equal(self):
        x = np.random.default_rng(1).normal(size=(2, 1, 4, 4))
        loss, grad = mse_loss(x, x.copy())
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(x))

    def test_mse_ones_vs_zeros(self):
        for shape in [(1, 1, 2, 2), (3, 2, 5, 7)]:
            loss, _ = mse_loss(np.ones(shape), np.zeros(shape))
            assert loss == pytest.approx(1.0)

    def test_mse_batch_permutation_invariant(self):
        rng = np.random.default_rng(2)
        pred = rng.normal(size=(4, 1, 3, 3))
        target = rng.normal(size=(4, 1, 3, 3))
        perm = rng.permutation(4)
        assert mse_loss(pred, target)[0] == pytest.approx(
            mse_loss(pred[perm], target[perm])[0], rel=1e-12
        )

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))


class TestFiniteDifferenceUtility:
    def test_quadratic(self):
        x = np.array([1.0, -2.0, 3.0])
        numeric = finite_difference(lambda: float(np.sum(x**2)), x, 1e-5)
        assert max_rel_error(2 * x, numeric) < 1e-9
