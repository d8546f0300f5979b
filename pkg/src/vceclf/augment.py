"""Seeded augmentation pipeline.

Stage order in :func:`apply_pipeline`::

    resize -> hflip? -> vflip? -> affine -> perspective? -> color jitter
           -> normalize -> random erase? -> gaussian blur?

Every random quantity for one sample is drawn up front by
:func:`sample_params` from a generator keyed by ``(seed, sample_index)``, so
results do not depend on the order in which samples are processed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import kernels
from .data_io import ImageBuffer


@dataclass(frozen=True)
class AugmentConfig:
    target_size: tuple[int, int] = (224, 224)  # (width, height)
    p_hflip: float = 0.5
    p_vflip: float = 0.3
    max_rotation_deg: float = 15.0
    max_translate_frac: float = 0.10
    scale_range: tuple[float, float] = (0.90, 1.10)
    p_perspective: float = 0.5
    perspective_distortion: float = 0.2
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    hue: float = 0.05
    norm_mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    norm_std: tuple[float, float, float] = (0.5, 0.5, 0.5)
    p_erase: float = 0.2
    erase_area_frac: tuple[float, float] = (0.02, 0.1)
    p_blur: float = 0.3
    blur_sigma_range: tuple[float, float] = (0.1, 2.0)

    def __post_init__(self):
        for name in ("target_size", "scale_range", "norm_mean", "norm_std",
                     "erase_area_frac", "blur_sigma_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("p_hflip", "p_vflip", "p_perspective", "p_erase", "p_blur"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        if min(self.target_size) < 1:
            raise ValueError(f"target_size must be positive, got {self.target_size}")
        for name in ("scale_range", "erase_area_frac", "blur_sigma_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} low {lo} exceeds high {hi}")
        if not 0.0 <= self.max_translate_frac <= 0.10 + 1e-12:
            raise ValueError("max_translate_frac must lie in [0, 0.10]")
        if self.scale_range[0] < 0.9 - 1e-12 or self.scale_range[1] > 1.1 + 1e-12:
            raise ValueError("scale_range must lie within [0.9, 1.1]")
        if not 0.0 <= self.max_rotation_deg <= 180.0:
            raise ValueError("max_rotation_deg must lie in [0, 180]")
        if not 0.0 <= self.perspective_distortion < 0.5:
            raise ValueError("perspective_distortion must lie in [0, 0.5)")
        if not (0.0 < self.erase_area_frac[0] and self.erase_area_frac[1] <= 1.0):
            raise ValueError("erase_area_frac must lie in (0, 1]")
        if self.blur_sigma_range[0] <= 0.0:
            raise ValueError("blur sigma must be positive")
        if any(s <= 0.0 for s in self.norm_std):
            raise ValueError("norm_std must be strictly positive")
        for name in ("brightness", "contrast", "saturation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} jitter must lie in [0, 1]")
        if not 0.0 <= self.hue <= 0.5:
            raise ValueError("hue jitter must lie in [0, 0.5]")


# ---------------------------------------------------------------------------
# individual transforms


def _require_raw(img: ImageBuffer, op: str) -> None:
    if img.normalized:
        raise ValueError(f"{op} expects a raw (un-normalized) image")


def _raw(data: np.ndarray) -> ImageBuffer:
    # interpolation of [0, 1] values can overshoot by an ulp
    return ImageBuffer(np.clip(data, 0.0, 1.0))


def _same_kind(img: ImageBuffer, data: np.ndarray) -> ImageBuffer:
    if img.normalized:
        return ImageBuffer(data, normalized=True)
    return _raw(data)


def resize_bilinear(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    """Half-pixel-centred bilinear resize with edge clamping."""
    _require_raw(img, "resize")
    if w < 1 or h < 1:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    if (img.width, img.height) == (w, h):
        return img
    return _raw(kernels.resize_bilinear(img.data, int(h), int(w)))


def hflip(img: ImageBuffer) -> ImageBuffer:
    return ImageBuffer(img.data[:, ::-1], img.normalized)


def vflip(img: ImageBuffer) -> ImageBuffer:
    return ImageBuffer(img.data[::-1], img.normalized)


def affine_matrix(w: int, h: int, angle_deg: float, translate: tuple[float, float], scale: float) -> np.ndarray:
    """Forward 3x3 map: rotate/scale about the image centre, then translate."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    a = math.radians(angle_deg)
    cos_a, sin_a = math.cos(a) * scale, math.sin(a) * scale
    tx, ty = translate[0] * w, translate[1] * h
    return np.array([
        [cos_a, -sin_a, cx + tx - cos_a * cx + sin_a * cy],
        [sin_a, cos_a, cy + ty - sin_a * cx - cos_a * cy],
        [0.0, 0.0, 1.0],
    ])


def rotate_affine(img: ImageBuffer, angle_deg: float, translate=(0.0, 0.0), scale: float = 1.0) -> ImageBuffer:
    """Inverse-mapped bilinear affine warp with black fill.

    ``translate`` is a fraction of width/height, at most 0.10 in magnitude;
    ``scale`` lies in [0.9, 1.1]. Angles are not range-limited here; the
    training sampler keeps them within the configured maximum.
    """
    fx, fy = translate
    if not math.isfinite(angle_deg):
        raise ValueError("rotation angle must be finite")
    if abs(fx) > 0.10 + 1e-12 or abs(fy) > 0.10 + 1e-12:
        raise ValueError(f"translation {translate} exceeds 10% of the image size")
    if not 0.9 - 1e-12 <= scale <= 1.1 + 1e-12:
        raise ValueError(f"scale {scale} outside [0.9, 1.1]")
    if angle_deg == 0.0 and fx == 0.0 and fy == 0.0 and scale == 1.0:
        return img
    fwd = affine_matrix(img.width, img.height, angle_deg, (fx, fy), scale)
    return _same_kind(img, kernels.warp_homography(img.data, np.linalg.inv(fwd)))


def _corners(w: int, h: int) -> np.ndarray:
    return np.array([[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]])


def homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 H with H @ [src, 1] ~ [dst, 1] for four point pairs."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    sol = np.linalg.solve(a, b)
    return np.append(sol, 1.0).reshape(3, 3)


def _check_quad(pts: np.ndarray, scale: float) -> None:
    tol = 1e-9 * scale * scale
    for i in range(4):
        p, q, r = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        if abs(cross) <= tol:
            raise ValueError("degenerate perspective: three corners are collinear")


def sample_perspective_displacements(rng: np.random.Generator, w: int, h: int, distortion: float) -> np.ndarray:
    """Per-corner (dx, dy) pushing each corner towards the image interior."""
    bound = distortion * min(w, h)
    mag = rng.uniform(0.0, bound, size=(4, 2))
    inward = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    return mag * inward


def perspective(img: ImageBuffer, displacements, max_distortion: Optional[float] = None) -> ImageBuffer:
    """Warp so that image corners land on ``corners + displacements``.

    Corners are ordered top-left, top-right, bottom-right, bottom-left.
    """
    disp = np.asarray(displacements, dtype=np.float64).reshape(4, 2)
    w, h = img.width, img.height
    if max_distortion is not None and np.abs(disp).max() > max_distortion * min(w, h) + 1e-9:
        raise ValueError("corner displacement exceeds the configured distortion")
    if not disp.any():
        return img
    src = _corners(w, h)
    dst = src + disp
    _check_quad(dst, max(w, h))
    # map output (displaced) coordinates back to the source
    hinv = homography(dst, src)
    return _same_kind(img, kernels.warp_homography(img.data, hinv))


def color_jitter(img: ImageBuffer, brightness: float = 1.0, contrast: float = 1.0,
                 saturation: float = 1.0, hue: float = 0.0) -> ImageBuffer:
    """Brightness, contrast, saturation, hue, in that order; clamped to [0, 1].

    Contrast blends towards the mean Rec.601 luma of the whole image,
    saturation towards each pixel's own luma; hue rotates by ``hue`` turns.
    """
    _require_raw(img, "color_jitter")
    if brightness == 1.0 and contrast == 1.0 and saturation == 1.0 and hue == 0.0:
        return img
    if min(brightness, contrast, saturation) < 0.0:
        raise ValueError("brightness, contrast and saturation factors must be >= 0")
    return _raw(kernels.color_jitter(img.data, float(brightness), float(contrast),
                                     float(saturation), float(hue)))


def normalize(img: ImageBuffer, mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5)) -> ImageBuffer:
    if img.normalized:
        raise ValueError("image is already normalized")
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if (std <= 0).any():
        raise ValueError("std must be strictly positive")
    return ImageBuffer((img.data - mean) / std, normalized=True)


def sample_erase_box(rng: np.random.Generator, w: int, h: int, area_frac_range,
                     aspect_range=(0.3, 3.3)) -> tuple[int, int, int, int]:
    """(top, left, height, width) of a box fully inside the image."""
    lo, hi = area_frac_range
    area = w * h
    log_lo, log_hi = math.log(aspect_range[0]), math.log(aspect_range[1])
    for _ in range(10):
        target = area * rng.uniform(lo, hi)
        aspect = math.exp(rng.uniform(log_lo, log_hi))
        eh = int(round(math.sqrt(target * aspect)))
        ew = int(round(math.sqrt(target / aspect)))
        if 1 <= eh <= h and 1 <= ew <= w:
            break
    else:
        # fall back to a square of the lower-bound area
        side = max(1, int(round(math.sqrt(area * lo))))
        eh, ew = min(side, h), min(side, w)
    top = int(rng.integers(0, h - eh + 1))
    left = int(rng.integers(0, w - ew + 1))
    return top, left, eh, ew


def erase_box(img: ImageBuffer, box, noise: np.ndarray, mean=None, std=None) -> ImageBuffer:
    """Overwrite ``box`` with ``noise`` given in raw intensity units."""
    top, left, eh, ew = box
    noise = np.asarray(noise, dtype=np.float64).reshape(eh, ew, 3)
    if img.normalized:
        if mean is None or std is None:
            raise ValueError("erasing a normalized image needs the normalization mean/std")
        noise = (noise - np.asarray(mean)) / np.asarray(std)
    data = np.array(img.data)
    data[top:top + eh, left:left + ew] = noise
    return ImageBuffer(data, img.normalized)


def random_erase(img: ImageBuffer, rng: np.random.Generator, area_frac_range=(0.02, 0.1),
                 mean=None, std=None) -> ImageBuffer:
    box = sample_erase_box(rng, img.width, img.height, area_frac_range)
    noise = rng.random((box[2], box[3], 3))
    return erase_box(img, box, noise, mean, std)


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(3.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable Gaussian, radius ceil(3 sigma), half-sample symmetric padding."""
    kernel = gaussian_kernel(sigma)
    return _same_kind(img, kernels.blur_separable(img.data, kernel))


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class AugmentParams:
    hflip: bool
    vflip: bool
    angle_deg: float
    translate: tuple[float, float]
    scale: float
    perspective: bool
    corner_displacements: tuple[tuple[float, float], ...]
    brightness: float
    contrast: float
    saturation: float
    hue: float
    erase: bool
    erase_box: tuple[int, int, int, int]
    erase_noise_seed: int
    blur: bool
    blur_sigma: float

    def to_dict(self) -> dict:
        return asdict(self)


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(sample_index)]))


def sample_params(cfg: AugmentConfig, rng: np.random.Generator) -> AugmentParams:
    """Draw every random quantity for one sample in a fixed order.

    All draws happen whether or not their gate opens, so each gate sees an
    independent uniform regardless of the others.
    """
    w, h = cfg.target_size
    gates = rng.random(5)
    angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg)
    translate = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac, size=2)
    scale = rng.uniform(*cfg.scale_range)
    disp = sample_perspective_displacements(rng, w, h, cfg.perspective_distortion)
    jitter = rng.uniform(-1.0, 1.0, size=4) * [cfg.brightness, cfg.contrast, cfg.saturation, cfg.hue]
    box = sample_erase_box(rng, w, h, cfg.erase_area_frac)
    noise_seed = int(rng.integers(0, 2**63 - 1))
    sigma = rng.uniform(*cfg.blur_sigma_range)

    assert abs(angle) <= cfg.max_rotation_deg
    assert cfg.scale_range[0] <= scale <= cfg.scale_range[1]
    assert np.all(np.abs(translate) <= cfg.max_translate_frac)
    return AugmentParams(
        hflip=bool(gates[0] < cfg.p_hflip),
        vflip=bool(gates[1] < cfg.p_vflip),
        angle_deg=float(angle),
        translate=(float(translate[0]), float(translate[1])),
        scale=float(scale),
        perspective=bool(gates[2] < cfg.p_perspective),
        corner_displacements=tuple(tuple(float(v) for v in row) for row in disp),
        brightness=float(1.0 + jitter[0]),
        contrast=float(1.0 + jitter[1]),
        saturation=float(1.0 + jitter[2]),
        hue=float(jitter[3]),
        erase=bool(gates[3] < cfg.p_erase),
        erase_box=box,
        erase_noise_seed=noise_seed,
        blur=bool(gates[4] < cfg.p_blur),
        blur_sigma=float(sigma),
    )


def apply_params(img: ImageBuffer, params: AugmentParams, cfg: AugmentConfig) -> ImageBuffer:
    w, h = cfg.target_size
    out = resize_bilinear(img, w, h)
    if params.hflip:
        out = hflip(out)
    if params.vflip:
        out = vflip(out)
    out = rotate_affine(out, params.angle_deg, params.translate, params.scale)
    if params.perspective:
        out = perspective(out, params.corner_displacements, cfg.perspective_distortion)
    out = color_jitter(out, params.brightness, params.contrast, params.saturation, params.hue)
    out = normalize(out, cfg.norm_mean, cfg.norm_std)
    if params.erase:
        top, left, eh, ew = params.erase_box
        noise = np.random.default_rng(params.erase_noise_seed).random((eh, ew, 3))
        out = erase_box(out, params.erase_box, noise, cfg.norm_mean, cfg.norm_std)
    if params.blur:
        out = gaussian_blur(out, params.blur_sigma)
    return out


def apply_pipeline(img: ImageBuffer, cfg: AugmentConfig, seed: int, sample_index: int,
                   return_params: bool = False):
    params = sample_params(cfg, sample_rng(seed, sample_index))
    out = apply_params(img, params, cfg)
    return (out, params) if return_params else out


def eval_transform(img: ImageBuffer, cfg: AugmentConfig) -> ImageBuffer:
    """Deterministic validation/inference transform: resize then normalize."""
    w, h = cfg.target_size
    return normalize(resize_bilinear(img, w, h), cfg.norm_mean, cfg.norm_std)
