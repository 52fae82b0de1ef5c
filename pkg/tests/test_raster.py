"""Color, blur, resampling, masking, and compositing primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage import color as skcolor

from vizdecoy.raster import (
    LchColor,
    MaskPattern,
    RasterImage,
    Rect,
    RegionError,
    apply_mask,
    circular_mean_hue,
    composite,
    convolve_clamped,
    gaussian_blur,
    gaussian_sigma,
    gaussian_taps,
    lch_to_srgb,
    linear_rgb,
    resample,
    srgb_to_lch,
)


def _lin(v: float) -> float:
    v /= 255.0
    return v / 12.92 if v <= 0.04045 else ((v + 0.055) / 1.055) ** 2.4


def _enc(v: float) -> float:
    v = 12.92 * v if v <= 0.0031308 else 1.055 * v ** (1 / 2.4) - 0.055
    return v * 255.0


# ---------------------------------------------------------------------------
# LCH conversions


class TestSrgbToLch:
    def test_white(self):
        c = srgb_to_lch((255, 255, 255))
        assert c.L == pytest.approx(100.0, abs=0.01)
        assert c.C < 0.5

    def test_black(self):
        assert srgb_to_lch((0, 0, 0)).L == pytest.approx(0.0, abs=0.01)

    def test_red_against_reference_colorimetry(self):
        # oracle: skimage's independent sRGB -> Lab implementation
        ours = srgb_to_lch((255, 0, 0))
        lab = skcolor.rgb2lab(np.array([[[1.0, 0.0, 0.0]]]))[0, 0]
        assert ours.L == pytest.approx(lab[0], abs=0.05)
        assert ours.C == pytest.approx(math.hypot(lab[1], lab[2]), abs=0.1)
        assert ours.L == pytest.approx(53.24, abs=0.05)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            srgb_to_lch((300, 0, 0))


class TestLchToSrgb:
    def test_white_roundtrip(self):
        rgb, clipped = lch_to_srgb(LchColor(100.0, 0.0, 0.0))
        assert not clipped
        assert all(abs(ch - 255) <= 1 for ch in rgb)

    def test_out_of_gamut_flagged(self):
        # oracle: a reference Lab -> sRGB -> Lab round trip through skimage
        # diverges badly for this color, proving it has no sRGB preimage
        lab = np.array([[[50.0, 150.0 * math.cos(math.radians(120)),
                          150.0 * math.sin(math.radians(120))]]])
        back = skcolor.rgb2lab(np.clip(skcolor.lab2rgb(lab), 0, 1))[0, 0]
        assert abs(back[1] - lab[0, 0, 1]) > 5.0
        _rgb, clipped = lch_to_srgb(LchColor(50.0, 150.0, 120.0))
        assert clipped

    @given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
    @settings(max_examples=200)
    def test_roundtrip_within_one(self, rgb):
        back, clipped = lch_to_srgb(srgb_to_lch(rgb))
        assert not clipped
        assert all(abs(a - b) <= 1 for a, b in zip(rgb, back))


class TestCircularMeanHue:
    def test_identical(self):
        assert circular_mean_hue([90.0, 90.0]) == (90.0, False)

    def test_symmetric_about_zero(self):
        mean, undefined = circular_mean_hue([10.0, 350.0])
        assert not undefined
        assert mean == pytest.approx(0.0, abs=1e-9)

    def test_quarter(self):
        # atan2((sin0 + sin90)/2, (cos0 + cos90)/2) = atan2(0.5, 0.5) = 45 deg
        mean, undefined = circular_mean_hue([0.0, 90.0])
        assert not undefined
        assert mean == pytest.approx(45.0, abs=1e-9)

    def test_degenerate_opposites(self):
        mean, undefined = circular_mean_hue([0.0, 180.0])
        assert undefined
        assert mean == 0.0

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            circular_mean_hue([])

    @given(
        st.lists(st.floats(0, 359.99), min_size=1, max_size=8),
        st.floats(-720, 720),
    )
    @settings(max_examples=100)
    def test_rotation_equivariance(self, hues, delta):
        base, undef_a = circular_mean_hue(hues)
        rotated, undef_b = circular_mean_hue([h + delta for h in hues])
        if undef_a or undef_b:
            return
        diff = (rotated - base - delta) % 360.0
        assert min(diff, 360.0 - diff) < 1e-6


# ---------------------------------------------------------------------------
# Gaussian blur


class TestGaussianBlur:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        img = RasterImage(rng.integers(0, 256, (20, 30, 3), dtype=np.uint8))
        out = gaussian_blur(img, 1)
        assert np.array_equal(out.pixels, img.pixels)

    def test_constant_image_unchanged(self):
        img = RasterImage.blank(40, 30, (87, 120, 33))
        for k in (3, 7, 15):
            assert np.array_equal(gaussian_blur(img, k).pixels, img.pixels)

    def test_impulse_matches_analytic_taps(self):
        # oracle: evaluate the normalized 1-D Gaussian taps by hand and form
        # the outer product; the center weight in linear light must match
        k = 3
        sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8
        assert gaussian_sigma(k) == pytest.approx(sigma)
        raw = [math.exp(-(x**2) / (2 * sigma**2)) for x in (-1, 0, 1)]
        taps = [t / sum(raw) for t in raw]
        np.testing.assert_allclose(gaussian_taps(k), taps, rtol=1e-12)

        arr = np.zeros((31, 31, 3), dtype=np.uint8)
        arr[15, 15] = 255
        blurred = gaussian_blur(RasterImage(arr), k)
        expected_center = _enc(taps[1] * taps[1] * _lin(255))
        assert abs(float(blurred.pixels[15, 15, 0]) - expected_center) <= 1.0

    def test_mean_preserved_with_constant_borders(self):
        # float-path invariant at 1e-6; byte output adds ~1e-5 quantization
        rng = np.random.default_rng(1)
        k = 9
        b = (k - 1) // 2
        plane = np.full((50, 70), 0.3)
        plane[b:-b, b:-b] = rng.uniform(0, 1, (50 - 2 * b, 70 - 2 * b))
        plane[b:-b, b:-b][0, :] = 0.3  # keep the border band constant
        plane[: b + 1, :] = 0.3
        plane[-b - 1 :, :] = 0.3
        plane[:, : b + 1] = 0.3
        plane[:, -b - 1 :] = 0.3
        out = convolve_clamped(plane, gaussian_taps(k))
        assert abs(out.mean() - plane.mean()) / plane.mean() < 1e-6

    def test_rejects_even_and_oversized(self):
        img = RasterImage.blank(10, 10, (0, 0, 0))
        with pytest.raises(ValueError):
            gaussian_blur(img, 4)
        with pytest.raises(ValueError):
            gaussian_blur(img, 11)


# ---------------------------------------------------------------------------
# Resampling


class TestResample:
    def test_identity(self):
        rng = np.random.default_rng(2)
        img = RasterImage(rng.integers(0, 256, (16, 24, 3), dtype=np.uint8))
        assert np.array_equal(resample(img, 1.0).pixels, img.pixels)

    def test_constant_average(self):
        img = RasterImage.blank(2, 2, (128, 128, 128))
        out = resample(img, 0.5)
        assert out.pixels.shape == (1, 1, 3)
        assert np.array_equal(out.pixels[0, 0], [128, 128, 128])

    def test_linear_light_average(self):
        # oracle: hand-compute linearize -> average -> re-encode
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        arr[1, :, :] = 100
        out = resample(RasterImage(arr), 0.5)
        expected = _enc((2 * _lin(0) + 2 * _lin(100)) / 4.0)
        assert abs(float(out.pixels[0, 0, 0]) - expected) <= 1.0

    def test_composition_within_two(self):
        rng = np.random.default_rng(3)
        img = RasterImage(rng.integers(0, 256, (120, 160, 3), dtype=np.uint8))
        for g1, g2 in ((0.6, 0.5), (0.5, 0.4), (0.8, 0.25)):
            twice = resample(resample(img, g1), g2)
            once = resample(img, g1 * g2)
            if (twice.width, twice.height) != (once.width, once.height):
                continue  # rounding produced different target dims
            diff = np.abs(twice.pixels.astype(int) - once.pixels.astype(int))
            assert diff.max() <= 2

    def test_rejects_bad_gamma(self):
        img = RasterImage.blank(4, 4, (0, 0, 0))
        for g in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                resample(img, g)


# ---------------------------------------------------------------------------
# Masking


def _oracle_keep(x: int, y: int, pattern: MaskPattern) -> bool:
    """Independent cell-enumeration oracle for the mask pattern."""
    ci, cj = y // pattern.cell_size, x // pattern.cell_size
    if pattern.orientation == "checkerboard":
        first = (ci + cj) % 2 == 0
    else:
        first = ci % 2 == 0
    return first if pattern.phase == "keep-first" else not first


class TestApplyMask:
    def _region_alpha(self, w, h, pattern):
        img = RasterImage.blank(w, h, (10, 20, 30)).to_rgba()
        out = apply_mask(img, Rect(0, 0, w, h), pattern)
        return out.pixels[..., 3] == 255

    def test_single_keep_cell_covers_region(self):
        pattern = MaskPattern(cell_size=16, phase="keep-first")
        kept = self._region_alpha(8, 8, pattern)
        assert kept.all()

    def test_checkerboard_counts(self):
        pattern = MaskPattern(cell_size=2, phase="keep-first")
        kept = self._region_alpha(4, 4, pattern)
        assert kept.sum() == 8 and (~kept).sum() == 8

    def test_stripes_clear_first(self):
        pattern = MaskPattern(cell_size=2, phase="clear-first",
                              orientation="horizontal-stripes")
        kept = self._region_alpha(6, 4, pattern)
        assert not kept[0].any() and not kept[1].any()
        assert kept[2].all() and kept[3].all()

    @given(
        st.integers(1, 7),
        st.sampled_from(["keep-first", "clear-first"]),
        st.sampled_from(["checkerboard", "horizontal-stripes"]),
        st.integers(1, 24),
        st.integers(1, 24),
    )
    @settings(max_examples=60)
    def test_matches_cell_enumeration_oracle(self, cell, phase, orientation, w, h):
        pattern = MaskPattern(cell, phase, orientation)
        kept = self._region_alpha(w, h, pattern)
        for y in range(h):
            for x in range(w):
                assert kept[y, x] == _oracle_keep(x, y, pattern)

    def test_footprint_limits_clearing(self):
        img = RasterImage.blank(8, 8, (10, 20, 30)).to_rgba()
        fp = np.zeros((8, 8), dtype=bool)
        fp[:4, :4] = True
        pattern = MaskPattern(1, phase="clear-first")
        out = apply_mask(img, Rect(0, 0, 8, 8), pattern, footprint=fp)
        cleared = out.pixels[..., 3] == 0
        assert cleared[:4, :4].any()
        assert not cleared[4:, :].any() and not cleared[:, 4:].any()

    def test_region_out_of_bounds(self):
        img = RasterImage.blank(8, 8, (0, 0, 0))
        with pytest.raises(RegionError):
            apply_mask(img, Rect(4, 4, 8, 8), MaskPattern(2))


# ---------------------------------------------------------------------------
# Compositing


class TestComposite:
    def test_transparent_layers_give_background(self):
        w, h = 6, 5
        out = composite((200, 10, 40), RasterImage.blank(w, h), RasterImage.blank(w, h))
        assert np.array_equal(out.pixels, RasterImage.blank(w, h, (200, 10, 40)).pixels)

    def test_opaque_original_occludes(self):
        rng = np.random.default_rng(4)
        w, h = 9, 7
        decoy = RasterImage(rng.integers(0, 256, (h, w, 4), dtype=np.uint8))
        orig = RasterImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).to_rgba()
        out = composite((255, 255, 255), decoy, orig)
        assert np.array_equal(out.pixels, orig.pixels[..., :3])

    def test_half_alpha_hand_blend(self):
        # oracle: evaluate the over operator by hand in linear light
        w = h = 1
        decoy = RasterImage(np.array([[[200, 40, 10, 255]]], dtype=np.uint8))
        orig = RasterImage(np.array([[[20, 180, 90, 128]]], dtype=np.uint8))
        out = composite((255, 255, 255), decoy, orig)
        a = 128 / 255.0
        for ch, (top, bottom) in enumerate(((20, 200), (180, 40), (90, 10))):
            expected = _enc(a * _lin(top) + (1 - a) * _lin(bottom))
            assert abs(float(out.pixels[0, 0, ch]) - expected) <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            composite((0, 0, 0), RasterImage.blank(4, 4), RasterImage.blank(5, 4))


def test_linear_rgb_lut_matches_formula():
    rng = np.random.default_rng(5)
    img = RasterImage(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
    lin = linear_rgb(img)
    for y in range(8):
        for x in range(8):
            assert lin[y, x, 0] == pytest.approx(_lin(int(img.pixels[y, x, 0])), rel=1e-12)
