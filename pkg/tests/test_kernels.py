"""The numba and numpy backends must agree on every kernel."""

import numpy as np
import pytest

from vceclf import kernels
from vceclf.augment import affine_matrix, gaussian_kernel, homography

pytestmark = pytest.mark.skipif(kernels.numba_impl is None, reason="numba not installed")

NB = kernels.numba_impl
NP = kernels.numpy_impl


def _img(rng, h=23, w=31):
    return rng.random((h, w, 3))


@pytest.mark.parametrize("out_hw", [(23, 31), (50, 17), (5, 64), (1, 1)])
def test_resize_parity(rng, out_hw):
    src = _img(rng)
    np.testing.assert_array_equal(NB.resize_bilinear(src, *out_hw), NP.resize_bilinear(src, *out_hw))


@pytest.mark.parametrize("angle,scale,t", [(0.0, 1.0, (0, 0)), (13.0, 0.93, (0.05, -0.08)), (90.0, 1.0, (0, 0))])
def test_affine_warp_parity(rng, angle, scale, t):
    src = _img(rng)
    hinv = np.linalg.inv(affine_matrix(31, 23, angle, t, scale))
    np.testing.assert_array_equal(NB.warp_homography(src, hinv), NP.warp_homography(src, hinv))


def test_perspective_warp_parity(rng):
    src = _img(rng)
    corners = np.array([[0.0, 0.0], [30.0, 0.0], [30.0, 22.0], [0.0, 22.0]])
    dst = corners + rng.uniform(-4, 4, size=(4, 2))
    hinv = homography(dst, corners)
    np.testing.assert_allclose(NB.warp_homography(src, hinv), NP.warp_homography(src, hinv), atol=1e-12)


@pytest.mark.parametrize("shift", [0.0, 0.03, -0.05, 0.5])
def test_hue_parity(rng, shift):
    src = _img(rng)
    src[0, 0] = 0.4  # a gray pixel
    np.testing.assert_allclose(NB.hue_shift(src, shift), NP.hue_shift(src, shift), atol=1e-14)


@pytest.mark.parametrize("factors", [(1.0, 1.0, 1.0, 0.0), (1.2, 0.8, 1.1, 0.03), (0.0, 1.0, 1.0, 0.0)])
def test_color_jitter_parity(rng, factors):
    src = _img(rng)
    np.testing.assert_allclose(NB.color_jitter(src, *factors), NP.color_jitter(src, *factors), atol=1e-12)


@pytest.mark.parametrize("sigma", [0.1, 1.0, 2.0, 9.0])
def test_blur_parity(rng, sigma):
    src = _img(rng, 9, 14)
    k = gaussian_kernel(sigma)
    np.testing.assert_array_equal(NB.blur_separable(src, k), NP.blur_separable(src, k))


def test_dense_parity_and_row_consistency(rng):
    x = rng.normal(size=(7, 19))
    w = rng.normal(size=(5, 19))
    b = rng.normal(size=5)
    a = NB.dense_forward(x, w, b)
    np.testing.assert_array_equal(a, NP.dense_forward(x, w, b))
    for i in range(7):
        np.testing.assert_array_equal(NB.dense_forward(x[i:i + 1], w, b)[0], a[i])
        np.testing.assert_array_equal(NP.dense_forward(x[i:i + 1], w, b)[0], a[i])
