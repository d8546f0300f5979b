"""Vectorised numpy kernels.

Every function here has a loop twin in ``_numba.py`` that evaluates the same
floating-point expressions in the same order, so the two backends agree to
the last bit on all supported platforms we test on.
"""

from __future__ import annotations

import numpy as np


def _src_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = n_in / n_out
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    pos = np.minimum(np.maximum(pos, 0.0), n_in - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape[:2]
    y0, y1, fy = _src_coords(out_h, h)
    x0, x1, fx = _src_coords(out_w, w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def warp_homography(src: np.ndarray, hinv: np.ndarray) -> np.ndarray:
    """Inverse-map every output pixel through ``hinv``; zero outside the source."""
    h, w = src.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]
    v = hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]
    d = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    valid = d > 0.0
    d = np.where(valid, d, 1.0)
    sx = u / d
    sy = v / d
    # keep floor() well defined for wildly out-of-range coordinates
    valid &= (sx > -2.0) & (sx < w + 1.0) & (sy > -2.0) & (sy < h + 1.0)
    sx = np.where(valid, sx, -2.0)
    sy = np.where(valid, sy, -2.0)
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    fx = (sx - x0f)[..., None]
    fy = (sy - y0f)[..., None]
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)

    def tap(yy, xx):
        ok = valid & (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals = src[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(ok[..., None], vals, 0.0)

    v00 = tap(y0, x0)
    v10 = tap(y0, x0 + 1)
    v01 = tap(y0 + 1, x0)
    v11 = tap(y0 + 1, x0 + 1)
    top = v00 * (1.0 - fx) + v10 * fx
    bot = v01 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def hue_shift(img: np.ndarray, shift: float) -> np.ndarray:
    r = img[..., 0]
    g = img[..., 1]
    b = img[..., 2]
    v = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = v - mn
    has_chroma = delta > 0.0
    safe_delta = np.where(has_chroma, delta, 1.0)
    safe_v = np.where(v > 0.0, v, 1.0)
    s = np.where(v > 0.0, delta / safe_v, 0.0)
    hr = (g - b) / safe_delta
    hg = 2.0 + (b - r) / safe_delta
    hb = 4.0 + (r - g) / safe_delta
    hue = np.where(r == v, hr, np.where(g == v, hg, hb))
    hue = np.where(has_chroma, hue / 6.0, 0.0)
    hue = hue - np.floor(hue)
    hue = hue + shift
    hue = hue - np.floor(hue)

    h6 = hue * 6.0
    i = np.floor(h6)
    f = h6 - i
    i = i.astype(np.int64) % 6
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    out = np.empty_like(img)
    out[..., 0] = np.choose(i, choices_r)
    out[..., 1] = np.choose(i, choices_g)
    out[..., 2] = np.choose(i, choices_b)
    return out


def _luma(data: np.ndarray) -> np.ndarray:
    return 0.299 * data[..., 0] + 0.587 * data[..., 1] + 0.114 * data[..., 2]


def color_jitter(img: np.ndarray, brightness: float, contrast: float,
                 saturation: float, hue: float) -> np.ndarray:
    out = img.copy()
    if brightness != 1.0:
        out = np.minimum(np.maximum(out * brightness, 0.0), 1.0)
    if contrast != 1.0:
        # sequential sum, matching the loop kernel
        gray_mean = float(np.add.accumulate(_luma(out).ravel())[-1]) / (out.shape[0] * out.shape[1])
        out = np.minimum(np.maximum(contrast * out + (1.0 - contrast) * gray_mean, 0.0), 1.0)
    if saturation != 1.0:
        lum = _luma(out)[..., None]
        out = np.minimum(np.maximum(saturation * out + (1.0 - saturation) * lum, 0.0), 1.0)
    if hue != 0.0:
        out = np.minimum(np.maximum(hue_shift(out, hue), 0.0), 1.0)
    return out


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def blur_separable(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    r = (kernel.shape[0] - 1) // 2
    cols = _reflect_index(np.arange(-r, w + r), w)
    padded = img[:, cols]
    tmp = np.zeros_like(img)
    for k in range(kernel.shape[0]):
        tmp += kernel[k] * padded[:, k:k + w]
    rows = _reflect_index(np.arange(-r, h + r), h)
    padded = tmp[rows]
    out = np.zeros_like(img)
    for k in range(kernel.shape[0]):
        out += kernel[k] * padded[k:k + h]
    return out


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    # sequential accumulation over the input dimension: row results do not
    # depend on how many rows share the call
    acc = np.zeros((x.shape[0], weight.shape[0]))
    for i in range(x.shape[1]):
        acc += x[:, i:i + 1] * weight[:, i]
    return acc + bias
