import numpy as np
import pytest

from vceclf.augment import normalize
from vceclf.data_io import ImageBuffer
from vceclf.nn_core import (
    Layer,
    ModelParams,
    backward,
    featurize,
    forward,
    init_params,
    log_softmax,
    parse_arch,
    softmax,
)


def _loss_and_dlogits(params, x, c):
    """L = sum(c * logits); dL/dlogits = c."""
    return float((forward(params, x) * c).sum()), c


def _fd_check(params, x, c, eps=1e-5):
    grads = backward(params, x, c).to_vector()
    vec = params.to_vector()
    num = np.empty_like(vec)
    for i in range(vec.size):
        up, dn = vec.copy(), vec.copy()
        up[i] += eps
        dn[i] -= eps
        lu, _ = _loss_and_dlogits(ModelParams.from_vector(up, params.shapes), x, c)
        ld, _ = _loss_and_dlogits(ModelParams.from_vector(dn, params.shapes), x, c)
        num[i] = (lu - ld) / (2 * eps)
    scale = np.maximum(np.abs(num), np.abs(grads)).max()
    return np.abs(grads - num).max() / max(scale, 1e-12)


class TestArch:
    def test_parse(self):
        assert parse_arch("linear:192x10") == ("linear", [192, 10])
        assert parse_arch("mlp:192x64x10") == ("mlp", [192, 64, 10])

    @pytest.mark.parametrize("bad", ["conv:3x3", "linear:192", "mlp:4x4", "linear:0x3", "linear:4x4x4"])
    def test_bad(self, bad):
        with pytest.raises(ValueError):
            parse_arch(bad)


class TestFeaturize:
    def test_zero_image(self):
        img = ImageBuffer(np.zeros((224, 224, 3)), normalized=True)
        f = featurize(img, (8, 8))
        assert f.shape == (192,) and np.all(f == 0)

    def test_full_size_is_flatten(self, rng):
        data = rng.normal(size=(4, 5, 3))
        f = featurize(ImageBuffer(data, normalized=True), (4, 5))
        np.testing.assert_array_equal(f, data.transpose(2, 0, 1).ravel())

    def test_checkerboard_mean(self):
        data = np.array([[[1.0, 0.0, 0.2], [0.0, 1.0, 0.4]], [[0.0, 1.0, 0.6], [1.0, 0.0, 0.8]]])
        f = featurize(ImageBuffer(data), (1, 1))
        np.testing.assert_allclose(f, [0.5, 0.5, 0.5], atol=1e-15)

    def test_non_divisible_pooling_is_area_weighted(self, rng):
        data = rng.random((5, 7, 3))
        f = featurize(ImageBuffer(data), (2, 3)).reshape(3, 2, 3)
        # brute force: supersample each pixel 6x6 and average the sub-cells
        fine = np.repeat(np.repeat(data, 2 * 3, axis=0), 3 * 2, axis=1)  # 30 x 42
        ref = fine.reshape(2, 15, 3, 14, 3).mean(axis=(1, 3)).transpose(2, 0, 1)
        np.testing.assert_allclose(f, ref, atol=1e-12)


class TestForward:
    def test_zero_weights(self, rng):
        b = np.array([0.5, -1.0, 2.0])
        p = ModelParams((Layer(np.zeros((3, 4)), b),))
        out = forward(p, rng.normal(size=(6, 4)))
        assert np.all(out == b)

    def test_identity_layer(self, rng):
        p = ModelParams((Layer(np.eye(3), np.zeros(3)),))
        x = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(forward(p, x), x)

    def test_hand_two_layer(self):
        # h = relu([[1,-1],[2,0.5]] x + [0,-1]); z = [[1,1],[-1,2]] h + [0.5,0]
        p = ModelParams((
            Layer(np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([0.0, -1.0])),
            Layer(np.array([[1.0, 1.0], [-1.0, 2.0]]), np.array([0.5, 0.0])),
        ))
        x = np.array([[1.0, 2.0], [3.0, -2.0]])
        # row 0: pre = [-1, 2] -> h = [0, 2] -> z = [2.5, 4]
        # row 1: pre = [5, 4] -> h = [5, 4] -> z = [9.5, 3]
        np.testing.assert_array_equal(forward(p, x), [[2.5, 4.0], [9.5, 3.0]])

    def test_dim_mismatch(self, rng):
        p = init_params("linear:4x2", 0)
        with pytest.raises(ValueError):
            forward(p, rng.normal(size=(3, 5)))

    def test_batch_consistency(self, rng):
        p = init_params("mlp:12x8x4", 3)
        x = rng.normal(size=(17, 12))
        full = forward(p, x)
        for i in range(17):
            assert forward(p, x[i:i + 1])[0].tobytes() == full[i].tobytes()


class TestSoftmax:
    def test_equal(self):
        np.testing.assert_allclose(softmax(np.zeros((1, 10))), 0.1, rtol=1e-15)

    def test_overflow(self):
        np.testing.assert_array_equal(softmax(np.array([[1000.0, 0.0]])), [[1.0, 0.0]])

    def test_logs(self):
        np.testing.assert_allclose(softmax(np.log([[1.0, 2.0, 3.0]])), [[1 / 6, 2 / 6, 3 / 6]], rtol=1e-14)

    def test_nan(self):
        with pytest.raises(ValueError):
            softmax(np.array([[np.nan, 1.0]]))

    def test_shift_and_argmax(self, rng):
        for _ in range(200):
            z = rng.normal(scale=5, size=(3, 7))
            c = rng.normal(scale=50)
            np.testing.assert_allclose(softmax(z + c), softmax(z), atol=1e-12)
            np.testing.assert_array_equal(softmax(z).argmax(axis=1), z.argmax(axis=1))
            np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-12)
            np.testing.assert_allclose(np.exp(log_softmax(z)), softmax(z), atol=1e-14)


class TestBackward:
    def test_zero_upstream(self, rng):
        p = init_params("mlp:5x4x3", 0)
        g = backward(p, rng.normal(size=(4, 5)), np.zeros((4, 3)))
        assert not g.to_vector().any()

    def test_linear_identity(self, rng):
        p = init_params("linear:5x3", 0)
        x = rng.normal(size=(4, 5))
        d = rng.normal(size=(4, 3))
        g = backward(p, x, d)
        np.testing.assert_allclose(g.layers[0].weight, sum(np.outer(d[i], x[i]) for i in range(4)), atol=1e-14)
        np.testing.assert_allclose(g.layers[0].bias, d.sum(axis=0), atol=1e-14)

    def test_finite_differences(self, rng):
        worst = 0.0
        for trial in range(100):
            d_in, hid, k = rng.integers(1, 7), rng.integers(1, 7), rng.integers(2, 6)
            arch = f"mlp:{d_in}x{hid}x{k}" if trial % 2 else f"linear:{d_in}x{k}"
            p = init_params(arch, trial)
            p = ModelParams.from_vector(p.to_vector() + rng.normal(scale=0.3, size=p.to_vector().size), p.shapes)
            x = rng.normal(size=(rng.integers(1, 6), d_in))
            c = rng.normal(size=(x.shape[0], k))
            worst = max(worst, _fd_check(p, x, c))
        assert worst < 1e-4

    def test_shape_mismatch(self, rng):
        p = init_params("linear:5x3", 0)
        with pytest.raises(ValueError):
            backward(p, rng.normal(size=(4, 5)), np.zeros((4, 2)))


class TestInit:
    def test_deterministic_and_zero_bias(self):
        a, b = init_params("mlp:192x64x10", 7), init_params("mlp:192x64x10", 7)
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())
        assert all(np.all(l.bias == 0) for l in a.layers)

    def test_xavier_bounds_and_mean(self):
        p = init_params("linear:400x250", 1)  # 100k weights
        w = p.layers[0].weight.ravel()
        limit = np.sqrt(6 / 650)
        assert np.abs(w).max() <= limit
        sd = limit / np.sqrt(3)
        assert abs(w.mean()) <= 4 * sd / np.sqrt(w.size)

    def test_zero_size(self):
        with pytest.raises(ValueError):
            init_params("linear:0x3", 0)

    def test_vector_roundtrip(self):
        p = init_params("mlp:6x5x3", 2)
        q = ModelParams.from_vector(p.to_vector(), p.shapes)
        np.testing.assert_array_equal(q.to_vector(), p.to_vector())
