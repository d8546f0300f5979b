"""Loop kernels compiled with numba.

Same arithmetic, same evaluation order as ``_numpy.py``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _src_coord(o, n_out, n_in):
    pos = (o + 0.5) * (n_in / n_out) - 0.5
    pos = min(max(pos, 0.0), n_in - 1.0)
    i0 = int(math.floor(pos))
    i1 = min(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


@njit(cache=True)
def resize_bilinear(src, out_h, out_w):
    h, w = src.shape[0], src.shape[1]
    out = np.empty((out_h, out_w, 3))
    for oy in range(out_h):
        y0, y1, fy = _src_coord(oy, out_h, h)
        for ox in range(out_w):
            x0, x1, fx = _src_coord(ox, out_w, w)
            for c in range(3):
                top = src[y0, x0, c] * (1.0 - fx) + src[y0, x1, c] * fx
                bot = src[y1, x0, c] * (1.0 - fx) + src[y1, x1, c] * fx
                out[oy, ox, c] = top * (1.0 - fy) + bot * fy
    return out


@njit(cache=True)
def _tap(src, yy, xx, c, h, w):
    if xx < 0 or xx >= w or yy < 0 or yy >= h:
        return 0.0
    return src[yy, xx, c]


@njit(cache=True)
def warp_homography(src, hinv):
    h, w = src.shape[0], src.shape[1]
    out = np.zeros((h, w, 3))
    for y in range(h):
        fy_ = float(y)
        for x in range(w):
            fx_ = float(x)
            u = hinv[0, 0] * fx_ + hinv[0, 1] * fy_ + hinv[0, 2]
            v = hinv[1, 0] * fx_ + hinv[1, 1] * fy_ + hinv[1, 2]
            d = hinv[2, 0] * fx_ + hinv[2, 1] * fy_ + hinv[2, 2]
            if not d > 0.0:
                continue
            sx = u / d
            sy = v / d
            if not (sx > -2.0 and sx < w + 1.0 and sy > -2.0 and sy < h + 1.0):
                continue
            x0f = math.floor(sx)
            y0f = math.floor(sy)
            fx = sx - x0f
            fy = sy - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            for c in range(3):
                v00 = _tap(src, y0, x0, c, h, w)
                v10 = _tap(src, y0, x0 + 1, c, h, w)
                v01 = _tap(src, y0 + 1, x0, c, h, w)
                v11 = _tap(src, y0 + 1, x0 + 1, c, h, w)
                top = v00 * (1.0 - fx) + v10 * fx
                bot = v01 * (1.0 - fx) + v11 * fx
                out[y, x, c] = top * (1.0 - fy) + bot * fy
    return out


@njit(cache=True)
def hue_shift(img, shift):
    h, w = img.shape[0], img.shape[1]
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            r = img[y, x, 0]
            g = img[y, x, 1]
            b = img[y, x, 2]
            v = max(max(r, g), b)
            mn = min(min(r, g), b)
            delta = v - mn
            s = delta / v if v > 0.0 else 0.0
            hue = 0.0
            if delta > 0.0:
                if r == v:
                    hue = (g - b) / delta
                elif g == v:
                    hue = 2.0 + (b - r) / delta
                else:
                    hue = 4.0 + (r - g) / delta
                hue = hue / 6.0
            hue = hue - math.floor(hue)
            hue = hue + shift
            hue = hue - math.floor(hue)

            h6 = hue * 6.0
            fi = math.floor(h6)
            f = h6 - fi
            i = int(fi) % 6
            p = v * (1.0 - s)
            q = v * (1.0 - s * f)
            t = v * (1.0 - s * (1.0 - f))
            if i == 0:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = v, t, p
            elif i == 1:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = q, v, p
            elif i == 2:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = p, v, t
            elif i == 3:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = p, q, v
            elif i == 4:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = t, p, v
            else:
                out[y, x, 0], out[y, x, 1], out[y, x, 2] = v, p, q
    return out


@njit(cache=True)
def _luma(r, g, b):
    return 0.299 * r + 0.587 * g + 0.114 * b


@njit(cache=True)
def _clip01(v):
    return min(max(v, 0.0), 1.0)


@njit(cache=True)
def color_jitter(img, brightness, contrast, saturation, hue):
    h, w = img.shape[0], img.shape[1]
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                v = img[y, x, c]
                if brightness != 1.0:
                    v = _clip01(v * brightness)
                out[y, x, c] = v
    if contrast != 1.0:
        total = 0.0
        for y in range(h):
            for x in range(w):
                total += _luma(out[y, x, 0], out[y, x, 1], out[y, x, 2])
        gray_mean = total / (h * w)
        for y in range(h):
            for x in range(w):
                for c in range(3):
                    out[y, x, c] = _clip01(contrast * out[y, x, c] + (1.0 - contrast) * gray_mean)
    if saturation != 1.0:
        for y in range(h):
            for x in range(w):
                lum = _luma(out[y, x, 0], out[y, x, 1], out[y, x, 2])
                for c in range(3):
                    out[y, x, c] = _clip01(saturation * out[y, x, c] + (1.0 - saturation) * lum)
    if hue != 0.0:
        out = hue_shift(out, hue)
        for y in range(h):
            for x in range(w):
                for c in range(3):
                    out[y, x, c] = _clip01(out[y, x, c])
    return out


@njit(cache=True)
def _reflect(i, n):
    period = 2 * n
    i = i % period
    if i >= n:
        i = period - 1 - i
    return i


@njit(cache=True)
def blur_separable(img, kernel):
    h, w = img.shape[0], img.shape[1]
    nk = kernel.shape[0]
    r = (nk - 1) // 2
    cols = np.empty(w + 2 * r, np.int64)
    for i in range(w + 2 * r):
        cols[i] = _reflect(i - r, w)
    rows = np.empty(h + 2 * r, np.int64)
    for i in range(h + 2 * r):
        rows[i] = _reflect(i - r, h)
    tmp = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for k in range(nk):
                    acc += kernel[k] * img[y, cols[x + k], c]
                tmp[y, x, c] = acc
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                for k in range(nk):
                    acc += kernel[k] * tmp[rows[y + k], x, c]
                out[y, x, c] = acc
    return out


@njit(cache=True)
def dense_forward(x, weight, bias):
    n, d = x.shape
    o = weight.shape[0]
    out = np.empty((n, o))
    for row in range(n):
        for j in range(o):
            acc = 0.0
            for i in range(d):
                acc += x[row, i] * weight[j, i]
            out[row, j] = acc + bias[j]
    return out
