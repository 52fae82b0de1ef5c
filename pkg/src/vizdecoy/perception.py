"""Distance-dependent perception simulation and similarity scoring.

A viewing context turns distance and visual angles into a downsampling
factor; images shrunk by it stand in for what the eye resolves at that
distance. Two full-reference similarity metrics score the protected
composite: a saliency-weighted index against the original and a
multi-scale structural index against the decoy. Every metric constant
lives in the versioned manifest shipped with the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .raster import RasterImage, resample


def load_manifest() -> dict:
    with resources.files(__package__).joinpath("metric_manifest.json").open("r") as fh:
        return json.load(fh)


_MANIFEST = load_manifest()
MANIFEST_VERSION: str = _MANIFEST["manifest_version"]
_MS = _MANIFEST["ms_ssim"]
_VS = _MANIFEST["vsi"]


# ---------------------------------------------------------------------------
# Viewing geometry


@dataclass(frozen=True)
class ViewingContext:
    """Observer distance plus the display geometry the image sits on."""

    distance_cm: float
    image_width_px: int
    image_height_px: int
    theta_h_deg: float = 40.0
    theta_w_deg: float = 50.0
    display_density_px_per_cm: float = 155.55  # 6.67-inch 1080x2400 panel

    def __post_init__(self):
        if self.distance_cm <= 0:
            raise ValueError("distance must be positive")
        if not (0 < self.theta_h_deg < 180 and 0 < self.theta_w_deg < 180):
            raise ValueError("visual angles must lie in (0, 180) degrees")
        if self.display_density_px_per_cm <= 0:
            raise ValueError("display density must be positive")
        if self.image_width_px < 1 or self.image_height_px < 1:
            raise ValueError("image dimensions must be >= 1")


def gamma(ctx: ViewingContext) -> float:
    """Downsampling factor for the context, clamped to <= 1.

    The visual field at distance D spans 2*tan(theta/2)*D per axis; that
    physical size converts to pixels through the display density, and the
    factor is sqrt of the image-to-field pixel-area ratio.
    """
    rho = ctx.display_density_px_per_cm
    h_v = 2.0 * math.tan(math.radians(ctx.theta_h_deg) / 2.0) * ctx.distance_cm * rho
    w_v = 2.0 * math.tan(math.radians(ctx.theta_w_deg) / 2.0) * ctx.distance_cm * rho
    g = math.sqrt((ctx.image_height_px * ctx.image_width_px) / (h_v * w_v))
    return min(1.0, g)


def simulate_perception(img: RasterImage, ctx: ViewingContext) -> RasterImage:
    """Box-resample the image by gamma(ctx); the image supplies its own dims."""
    bound = replace(ctx, image_width_px=img.width, image_height_px=img.height)
    return resample(img, gamma(bound))


@dataclass(frozen=True)
class PerceivedPair:
    close: RasterImage
    far: RasterImage
    gamma_close: float
    gamma_far: float

    def __post_init__(self):
        if not (self.gamma_far <= self.gamma_close <= 1.0):
            raise ValueError("expected gamma_far <= gamma_close <= 1")


def perceive(img: RasterImage, ctx_close: ViewingContext, ctx_far: ViewingContext) -> PerceivedPair:
    close_ctx = replace(ctx_close, image_width_px=img.width, image_height_px=img.height)
    far_ctx = replace(ctx_far, image_width_px=img.width, image_height_px=img.height)
    g_c, g_f = gamma(close_ctx), gamma(far_ctx)
    return PerceivedPair(resample(img, g_c), resample(img, g_f), g_c, g_f)


# ---------------------------------------------------------------------------
# MS-SSIM (luminance channel)


def _luma(img: RasterImage) -> np.ndarray:
    w = _MS["luma_weights"]
    px = img.pixels[..., :3].astype(np.float64)
    return w[0] * px[..., 0] + w[1] * px[..., 1] + w[2] * px[..., 2]


def _gauss_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _windowed(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a 1-D window."""
    out = sliding_window_view(plane, len(taps), axis=0) @ taps
    return sliding_window_view(out, len(taps), axis=1) @ taps


def ms_ssim_scales(min_dim: int, window: int = _MS["window_size"]) -> int:
    """Scale count: min(5, floor(log2(min_dim / window)) + 1)."""
    return min(5, int(math.floor(math.log2(min_dim / window))) + 1)


def _ssim_terms(a: np.ndarray, b: np.ndarray, taps: np.ndarray) -> tuple[float, float]:
    """Mean SSIM (l*cs) and mean contrast-structure (cs) over valid windows."""
    c1 = (_MS["k1"] * _MS["data_range"]) ** 2
    c2 = (_MS["k2"] * _MS["data_range"]) ** 2
    mu1 = _windowed(a, taps)
    mu2 = _windowed(b, taps)
    s11 = _windowed(a * a, taps) - mu1 * mu1
    s22 = _windowed(b * b, taps) - mu2 * mu2
    s12 = _windowed(a * b, taps) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _halve(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    plane = plane[: h - h % 2, : w - w % 2]
    return (plane[0::2, 0::2] + plane[0::2, 1::2] + plane[1::2, 0::2] + plane[1::2, 1::2]) / 4.0


def ms_ssim(a: RasterImage, b: RasterImage) -> float:
    """Luminance-channel multi-scale structural similarity in [0, 1].

    Contrast-structure terms enter at every scale, the luminance term only
    at the coarsest; the canonical five scale weights renormalize when the
    image is too small for five halvings.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("images must share dimensions")
    window = _MS["window_size"]
    min_dim = min(a.width, a.height)
    if min_dim < window:
        raise ValueError(f"images must be at least {window}x{window}")
    scales = ms_ssim_scales(min_dim)
    weights = np.asarray(_MS["scale_weights"][:scales], dtype=np.float64)
    weights = weights / weights.sum()
    taps = _gauss_window(window, _MS["window_sigma"])

    x, y = _luma(a), _luma(b)
    value = 1.0
    for s in range(scales):
        ssim_mean, cs_mean = _ssim_terms(x, y, taps)
        if s < scales - 1:
            value *= max(cs_mean, 0.0) ** weights[s]
            x, y = _halve(x), _halve(y)
        else:
            value *= max(ssim_mean, 0.0) ** weights[s]
    return float(value)


# ---------------------------------------------------------------------------
# Saliency-weighted similarity


def _box_resize(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average resize of a float plane to any target shape."""
    from .raster import _box_axis  # same integral-image machinery

    return _box_axis(_box_axis(plane, out_h, 0), out_w, 1)


def spectral_residual_saliency(img: RasterImage) -> np.ndarray:
    """Spectral-residual saliency map, min-max normalized to [0, 1].

    The log-amplitude spectrum of a downscaled luminance plane minus its
    local mean is recombined with the original phase; the squared inverse
    transform, smoothed, highlights the statistically surprising regions.
    """
    cfg = _VS["saliency"]
    n = cfg["internal_size"]
    w = cfg["luma_weights"]
    px = img.pixels[..., :3].astype(np.float64)
    luma = w[0] * px[..., 0] + w[1] * px[..., 1] + w[2] * px[..., 2]
    small = _box_resize(luma, n, n)

    spectrum = np.fft.fft2(small)
    log_amp = np.log(np.abs(spectrum) + 1e-12)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=cfg["spectrum_mean_filter"], mode="nearest")
    recon = np.fft.ifft2(np.exp(residual + 1j * np.angle(spectrum)))
    sal = np.abs(recon) ** 2
    sal = ndimage.gaussian_filter(sal, sigma=cfg["smooth_sigma"], mode="nearest")

    sal = _box_resize(sal, img.height, img.width)
    lo, hi = float(sal.min()), float(sal.max())
    if hi - lo < 1e-12:
        return np.zeros_like(sal)
    return (sal - lo) / (hi - lo)


def _lmn(img: RasterImage) -> np.ndarray:
    m = np.asarray(_VS["lmn_matrix"], dtype=np.float64)
    px = img.pixels[..., :3].astype(np.float64)
    return px @ m.T


def _scharr_magnitude(plane: np.ndarray) -> np.ndarray:
    k = np.asarray(_VS["scharr"], dtype=np.float64) / _VS["scharr_norm"]
    gx = ndimage.correlate(plane, k, mode="nearest")
    gy = ndimage.correlate(plane, k.T, mode="nearest")
    return np.sqrt(gx * gx + gy * gy)


def _similarity(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    return (2.0 * a * b + c) / (a * a + b * b + c)


def _pool_avg(plane: np.ndarray, k: int) -> np.ndarray:
    h, w = plane.shape
    plane = plane[: h - h % k, : w - w % k]
    return plane.reshape(h // k, k, w // k, k).mean(axis=(1, 3))


@dataclass(frozen=True, eq=False)
class VsiPrepared:
    """Per-image features entering the saliency-weighted similarity."""

    saliency: np.ndarray
    lmn: np.ndarray
    gradient: np.ndarray
    width: int
    height: int


def vsi_prepare(img: RasterImage) -> VsiPrepared:
    """Precompute one image's saliency/gradient/chroma features.

    Splitting preparation from comparison lets callers that score one image
    against many reuse the expensive half.
    """
    if min(img.width, img.height) < 32:
        raise ValueError("images must be at least 32x32")
    sal = spectral_residual_saliency(img)
    lmn = _lmn(img)
    k = max(1, round(min(img.width, img.height) / _VS["pooling_downsample_divisor"]))
    if k > 1:
        sal = _pool_avg(sal, k)
        lmn = np.stack([_pool_avg(lmn[..., i], k) for i in range(3)], axis=-1)
    grad = _scharr_magnitude(lmn[..., 0])
    return VsiPrepared(sal, lmn, grad, img.width, img.height)


def vsi_prepared(a: VsiPrepared, b: VsiPrepared) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("images must share dimensions")
    s_vs = _similarity(a.saliency, b.saliency, _VS["c1"])
    s_g = _similarity(a.gradient, b.gradient, _VS["c2"])
    s_c = _similarity(a.lmn[..., 1], b.lmn[..., 1], _VS["c3"]) * _similarity(
        a.lmn[..., 2], b.lmn[..., 2], _VS["c3"]
    )
    # chroma similarity can dip negative; its fractional power is taken as
    # the real part of the principal complex power
    s_c_pow = np.real(np.power(s_c.astype(np.complex128), _VS["beta"]))
    s = s_vs * np.power(np.maximum(s_g, 0.0), _VS["alpha"]) * s_c_pow

    weight = np.maximum(a.saliency, b.saliency)
    eps = np.finfo(np.float64).eps
    return float((np.sum(s * weight) + eps) / (np.sum(weight) + eps))


def vsi(a: RasterImage, b: RasterImage) -> float:
    """Saliency-weighted full-reference similarity in (0, 1].

    Pointwise similarity of saliency, gradient magnitude, and two opponent
    chroma channels, pooled with weights equal to the pointwise max of the
    two saliency maps, so differences in attention-grabbing regions count
    most. Constants come from the metric manifest.
    """
    return vsi_prepared(vsi_prepare(a), vsi_prepare(b))


# ---------------------------------------------------------------------------
# Gap scores


@dataclass(frozen=True)
class GapScores:
    gap1: float
    gap2: float
    score: float
    alpha: float
    beta: float

    def to_json(self) -> dict:
        return {"gap1": self.gap1, "gap2": self.gap2, "score": self.score,
                "alpha": self.alpha, "beta": self.beta}


def gap_scores(
    original: PerceivedPair,
    decoy: PerceivedPair,
    protected: PerceivedPair,
    alpha: float = 0.5,
    beta: float = 0.5,
) -> GapScores:
    """Owner-side and attacker-side similarity gaps and their weighted sum.

    gap1: saliency-weighted similarity of protected to original, close
    minus far. gap2: structural similarity of protected to decoy, far minus
    close. score = alpha * gap1 + beta * gap2.
    """
    for name, pair in (("close", (original.close, decoy.close, protected.close)),
                       ("far", (original.far, decoy.far, protected.far))):
        dims = {(im.width, im.height) for im in pair}
        if len(dims) != 1:
            raise ValueError(f"images of the {name} condition differ in size: {dims}")
    gap1 = vsi(original.close, protected.close) - vsi(original.far, protected.far)
    gap2 = ms_ssim(decoy.far, protected.far) - ms_ssim(decoy.close, protected.close)
    return GapScores(gap1=gap1, gap2=gap2, score=alpha * gap1 + beta * gap2,
                     alpha=alpha, beta=beta)
