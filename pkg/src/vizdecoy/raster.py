"""Raster and color primitives.

Images are 8-bit sRGB(A) numpy arrays wrapped in :class:`RasterImage`.
Everything that averages or blends pixels (blur, resampling, compositing)
does so in linearized RGB; the stored representation stays gamma-encoded
sRGB throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

RGB = tuple[int, int, int]

# D65 / 2-degree observer reference white.
_XN, _YN, _ZN = 0.95047, 1.0, 1.08883

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)


class RegionError(ValueError):
    """A mask/crop region falls outside its image."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle: columns [x, x+w), rows [y, y+h)."""

    x: int
    y: int
    w: int
    h: int

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def contains_rect(self, other: "Rect") -> bool:
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x2 <= self.x2
            and other.y2 <= self.y2
        )


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit sRGB image, shape (height, width, 3) or (height, width, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] not in (3, 4):
            raise ValueError(f"expected (h, w, 3|4) array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def has_alpha(self) -> bool:
        return self.pixels.shape[2] == 4

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    def to_rgba(self) -> "RasterImage":
        if self.has_alpha:
            return self
        h, w, _ = self.pixels.shape
        out = np.empty((h, w, 4), dtype=np.uint8)
        out[..., :3] = self.pixels
        out[..., 3] = 255
        return RasterImage(out)

    @staticmethod
    def blank(width: int, height: int, color: Sequence[int] | None = None) -> "RasterImage":
        """Opaque constant image; transparent RGBA when color is None."""
        if color is None:
            return RasterImage(np.zeros((height, width, 4), dtype=np.uint8))
        arr = np.empty((height, width, len(color)), dtype=np.uint8)
        arr[:] = np.asarray(color, dtype=np.uint8)
        return RasterImage(arr)


def read_png(path: str | Path) -> RasterImage:
    with Image.open(path) as im:
        mode = "RGBA" if "A" in im.getbands() else "RGB"
        arr = np.asarray(im.convert(mode), dtype=np.uint8)
    return RasterImage(arr)


def write_png(img: RasterImage, path: str | Path) -> None:
    Image.fromarray(img.pixels).save(path, format="PNG")


# ---------------------------------------------------------------------------
# sRGB transfer and LCH color space


def _to_linear(v: np.ndarray) -> np.ndarray:
    """sRGB-encoded [0, 1] -> linear-light [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _from_linear(v: np.ndarray) -> np.ndarray:
    """Linear-light -> sRGB-encoded, both in [0, 1] (negatives clamped)."""
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, None)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1 / 2.4) - 0.055)


_LINEAR_LUT = _to_linear(np.arange(256, dtype=np.float64) / 255.0)


def linear_rgb(img: RasterImage) -> np.ndarray:
    """Float64 linear-light copy of the RGB channels, shape (h, w, 3)."""
    return _LINEAR_LUT[img.pixels[..., :3]]


def encode_rgb(linear: np.ndarray) -> np.ndarray:
    """Linear-light floats -> uint8 sRGB with round-half-away from zero."""
    enc = _from_linear(linear)
    return np.clip(np.rint(enc * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class LchColor:
    """Cylindrical CIE Lab: luminance L in [0, 100], chroma C >= 0, hue in degrees."""

    L: float
    C: float
    H: float

    def __post_init__(self):
        object.__setattr__(self, "L", float(min(100.0, max(0.0, self.L))))
        object.__setattr__(self, "C", float(max(0.0, self.C)))
        object.__setattr__(self, "H", _norm_deg(float(self.H)))


def srgb_to_lch(rgb: Sequence[float]) -> LchColor:
    """8-bit sRGB triple -> LCH via linear RGB -> XYZ (D65) -> Lab."""
    v = np.asarray(rgb, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError("expected an (r, g, b) triple")
    if np.any(v < 0) or np.any(v > 255):
        raise ValueError("channel values must lie in [0, 255]")
    xyz = _RGB_TO_XYZ @ _to_linear(v / 255.0)
    fx, fy, fz = _lab_f(xyz / np.array([_XN, _YN, _ZN]))
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return LchColor(L=L, C=math.hypot(a, b), H=math.degrees(math.atan2(b, a)))


def lch_to_srgb(c: LchColor) -> tuple[RGB, bool]:
    """Inverse of srgb_to_lch.

    Returns the 8-bit triple and an out-of-gamut flag; out-of-gamut linear
    components are clipped channel-wise before encoding.
    """
    h = math.radians(c.H)
    a = c.C * math.cos(h)
    b = c.C * math.sin(h)
    fy = (c.L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = _lab_f_inv(np.array([fx, fy, fz])) * np.array([_XN, _YN, _ZN])
    lin = _XYZ_TO_RGB @ xyz
    # tolerance sits above the ~2e-7 inversion residual of the published
    # 7-digit matrices but far below any real gamut excursion
    clipped = bool(np.any(lin < -1e-6) or np.any(lin > 1 + 1e-6))
    lin = np.clip(lin, 0.0, 1.0)
    out = np.clip(np.rint(_from_linear(lin) * 255.0), 0, 255).astype(int)
    return (int(out[0]), int(out[1]), int(out[2])), clipped


_LAB_DELTA = 6.0 / 29.0


def _lab_f(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    return np.where(f > _LAB_DELTA, f**3, 3 * _LAB_DELTA**2 * (f - 4.0 / 29.0))


def circular_mean_hue(hues: Sequence[float]) -> tuple[float, bool]:
    """Vector-sum mean of hue angles in degrees.

    Returns (mean in [0, 360), undefined_flag). When the resultant vector is
    shorter than 1e-9 the mean is directionless; the first input hue is
    returned with the flag set.
    """
    if len(hues) == 0:
        raise ValueError("cannot average an empty list of hues")
    rad = np.radians(np.asarray(hues, dtype=np.float64))
    s = float(np.mean(np.sin(rad)))
    c = float(np.mean(np.cos(rad)))
    if math.hypot(s, c) < 1e-9:
        return _norm_deg(float(hues[0])), True
    return _norm_deg(math.degrees(math.atan2(s, c))), False


def _norm_deg(deg: float) -> float:
    deg = deg % 360.0
    return 0.0 if deg >= 360.0 else deg


# ---------------------------------------------------------------------------
# Blur and resampling


def gaussian_sigma(kernel_size: int) -> float:
    """Aperture-derived sigma: 0.3 * ((k - 1)/2 - 1) + 0.8 for k >= 3."""
    if kernel_size < 3:
        return 0.0
    return 0.3 * ((kernel_size - 1) / 2.0 - 1.0) + 0.8


def gaussian_taps(kernel_size: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps for the given odd aperture."""
    sigma = gaussian_sigma(kernel_size)
    if kernel_size == 1:
        return np.array([1.0])
    half = (kernel_size - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    taps = np.exp(-(x**2) / (2.0 * sigma**2))
    return taps / taps.sum()


def convolve_clamped(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable 2-D correlation of a float plane, clamp-to-edge borders."""
    out = ndimage.correlate1d(plane, taps, axis=0, mode="nearest")
    return ndimage.correlate1d(out, taps, axis=1, mode="nearest")


def gaussian_blur(img: RasterImage, kernel_size: int) -> RasterImage:
    """Separable Gaussian low-pass in linear light, clamp-to-edge borders.

    Alpha, when present, is handled premultiplied so transparent regions do
    not bleed their (meaningless) color into opaque neighbors.
    """
    k = kernel_size
    if k % 2 == 0 or k < 1 or k > min(img.width, img.height):
        raise ValueError(
            f"kernel size must be odd and within [1, {min(img.width, img.height)}], got {k}"
        )
    if k == 1:
        return img.copy()
    taps = gaussian_taps(k)

    lin = linear_rgb(img)
    if img.has_alpha:
        alpha = img.pixels[..., 3] / 255.0
        pre = lin * alpha[..., None]
        pre_b = np.stack([convolve_clamped(pre[..., i], taps) for i in range(3)], axis=-1)
        alpha_b = convolve_clamped(alpha, taps)
        with np.errstate(invalid="ignore", divide="ignore"):
            rgb_b = np.where(alpha_b[..., None] > 1e-12, pre_b / alpha_b[..., None], 0.0)
        out = np.empty(img.pixels.shape, dtype=np.uint8)
        out[..., :3] = encode_rgb(rgb_b)
        out[..., 3] = np.clip(np.rint(alpha_b * 255.0), 0, 255).astype(np.uint8)
        return RasterImage(out)
    blurred = np.stack([convolve_clamped(lin[..., i], taps) for i in range(3)], axis=-1)
    return RasterImage(encode_rgb(blurred))


def _box_axis(arr: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Exact area-average resampling of one axis (piecewise-constant pixels)."""
    arr = np.moveaxis(arr, axis, 0)
    in_n = arr.shape[0]
    scale = in_n / out_n
    edges = np.arange(out_n + 1, dtype=np.float64) * scale
    edges[-1] = in_n
    # F(t) = integral of the pixel step function over [0, t).
    cum = np.concatenate([np.zeros((1,) + arr.shape[1:]), np.cumsum(arr, axis=0)], axis=0)
    idx = np.minimum(np.floor(edges).astype(int), in_n - 1)
    frac = edges - idx
    f_at = cum[idx] + frac.reshape((-1,) + (1,) * (arr.ndim - 1)) * arr[idx]
    out = (f_at[1:] - f_at[:-1]) / scale
    return np.moveaxis(out, 0, axis)


def resample(img: RasterImage, gamma: float) -> RasterImage:
    """Box-filter (area average) downsampling in linear light.

    Output dims are round(gamma * dims), at least 1x1; gamma = 1 is the
    byte-exact identity.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"scale factor must lie in (0, 1], got {gamma}")
    if gamma == 1.0:
        return img.copy()
    out_w = max(1, int(math.floor(gamma * img.width + 0.5)))
    out_h = max(1, int(math.floor(gamma * img.height + 0.5)))
    lin = linear_rgb(img)
    if img.has_alpha:
        alpha = img.pixels[..., 3] / 255.0
        pre = np.concatenate([lin * alpha[..., None], alpha[..., None]], axis=-1)
        pre = _box_axis(_box_axis(pre, out_h, 0), out_w, 1)
        a = pre[..., 3]
        with np.errstate(invalid="ignore", divide="ignore"):
            rgb = np.where(a[..., None] > 1e-12, pre[..., :3] / a[..., None], 0.0)
        out = np.empty((out_h, out_w, 4), dtype=np.uint8)
        out[..., :3] = encode_rgb(rgb)
        out[..., 3] = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
        return RasterImage(out)
    lin = _box_axis(_box_axis(lin, out_h, 0), out_w, 1)
    return RasterImage(encode_rgb(lin))


# ---------------------------------------------------------------------------
# Masking and compositing

Phase = Literal["keep-first", "clear-first"]
Orientation = Literal["checkerboard", "horizontal-stripes"]


@dataclass(frozen=True)
class MaskPattern:
    """Alternating-cell transparency pattern with cell side = mask area."""

    cell_size: int
    phase: Phase = "keep-first"
    orientation: Orientation = "checkerboard"

    def __post_init__(self):
        if self.cell_size < 1:
            raise ValueError("cell size must be >= 1")
        if self.phase not in ("keep-first", "clear-first"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.orientation not in ("checkerboard", "horizontal-stripes"):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    def keep_grid(self, width: int, height: int) -> np.ndarray:
        """Boolean (height, width) grid, True where pixels are kept.

        Cell (0, 0) sits at the top-left; in keep-first phase it is kept.
        """
        ci = np.arange(height) // self.cell_size
        cj = np.arange(width) // self.cell_size
        if self.orientation == "checkerboard":
            parity = (ci[:, None] + cj[None, :]) % 2
        else:
            parity = np.broadcast_to((ci % 2)[:, None], (height, width))
        keep = parity == 0
        if self.phase == "clear-first":
            keep = ~keep
        return keep


def apply_mask(
    img: RasterImage,
    region: Rect,
    pattern: MaskPattern,
    footprint: np.ndarray | None = None,
) -> RasterImage:
    """Clear the pattern's "clear" cells to alpha 0 inside the region.

    The pattern is anchored at the region's top-left. An optional boolean
    footprint (full-image shape) restricts clearing to a mark's own pixels;
    pixels outside the region or footprint are untouched.
    """
    bounds = Rect(0, 0, img.width, img.height)
    if not bounds.contains_rect(region) or region.w < 1 or region.h < 1:
        raise RegionError(f"region {region} not within image {img.width}x{img.height}")
    out = img.to_rgba().pixels.copy()
    keep = pattern.keep_grid(region.w, region.h)
    clear = ~keep
    if footprint is not None:
        if footprint.shape != (img.height, img.width):
            raise ValueError("footprint shape must match the image")
        clear = clear & footprint[region.y : region.y2, region.x : region.x2]
    window = out[region.y : region.y2, region.x : region.x2, 3]
    window[clear] = 0
    return RasterImage(out)


def composite(
    background: Sequence[int],
    decoy_layer: RasterImage,
    original_layer: RasterImage,
) -> RasterImage:
    """Source-over blend in linear light: background, then decoy, then original.

    Returns a fully opaque RGB image.
    """
    if (decoy_layer.width, decoy_layer.height) != (original_layer.width, original_layer.height):
        raise ValueError(
            f"layer dimensions differ: {decoy_layer.width}x{decoy_layer.height} vs "
            f"{original_layer.width}x{original_layer.height}"
        )
    acc = np.empty((decoy_layer.height, decoy_layer.width, 3), dtype=np.float64)
    acc[:] = _LINEAR_LUT[np.asarray(background, dtype=np.uint8)]
    for layer in (decoy_layer, original_layer):
        px = layer.to_rgba().pixels
        a = (px[..., 3] / 255.0)[..., None]
        src = _LINEAR_LUT[px[..., :3]]
        acc = src * a + acc * (1.0 - a)
    return RasterImage(encode_rgb(acc))
