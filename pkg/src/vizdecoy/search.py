"""Grid search over the four decoy channels and composite construction.

A candidate is (decoy luminance, decoy chroma, blur kernel, mask cell
size). Building one means: color the decoy marks, blur that layer, punch
the mask pattern through the original's marks, and composite everything
over the background. Candidates are scored by the perception gaps and the
best-scoring one wins, with a documented deterministic tie-break.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .charts import GeometrySet, Mark, mark_footprint, render_marks
from .decoys import DecoyGeometry
from .perception import (
    GapScores,
    PerceivedPair,
    ViewingContext,
    gamma,
    ms_ssim,
    perceive,
    vsi_prepare,
    vsi_prepared,
)
from .raster import (
    RGB,
    LchColor,
    MaskPattern,
    RasterImage,
    Rect,
    apply_mask,
    composite,
    gaussian_blur,
    lch_to_srgb,
)

WHITE: RGB = (255, 255, 255)


@dataclass(frozen=True)
class AgnosticParams:
    """One grid point: decoy L/C, blur kernel size, mask cell size."""

    decoy_l: float
    decoy_c: float
    kernel_size: int
    mask_area: int

    def __post_init__(self):
        if not (0.0 <= self.decoy_l <= 100.0):
            raise ValueError(f"decoy luminance {self.decoy_l} outside [0, 100]")
        if not (0.0 <= self.decoy_c <= 100.0):
            raise ValueError(f"decoy chroma {self.decoy_c} outside [0, 100]")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.kernel_size}")
        if self.mask_area < 1:
            raise ValueError(f"mask area must be >= 1, got {self.mask_area}")

    def to_json(self) -> dict:
        return {"decoy_l": self.decoy_l, "decoy_c": self.decoy_c,
                "kernel_size": self.kernel_size, "mask_area": self.mask_area}


@dataclass(frozen=True)
class SearchGrid:
    l_values: tuple[float, ...]
    c_values: tuple[float, ...]
    k_values: tuple[int, ...]
    m_values: tuple[int, ...]
    stage_plan: str = "single-pass"  # or "coarse-then-refine"

    def __post_init__(self):
        for name, vals in (("l_values", self.l_values), ("c_values", self.c_values),
                           ("k_values", self.k_values), ("m_values", self.m_values)):
            if len(vals) == 0:
                raise ValueError(f"{name} is empty")
            if list(vals) != sorted(set(vals)):
                raise ValueError(f"{name} must be strictly ascending without duplicates")
        if any(not 0 <= v <= 100 for v in self.l_values + self.c_values):
            raise ValueError("L and C values must lie in [0, 100]")
        if any(k < 1 or k % 2 == 0 for k in self.k_values):
            raise ValueError("kernel sizes must be odd and >= 1")
        if any(m < 1 for m in self.m_values):
            raise ValueError("mask areas must be >= 1")
        if self.stage_plan not in ("single-pass", "coarse-then-refine"):
            raise ValueError(f"unknown stage plan {self.stage_plan!r}")

    @property
    def size(self) -> int:
        return (len(self.l_values) * len(self.c_values)
                * len(self.k_values) * len(self.m_values))

    def points(self) -> list[AgnosticParams]:
        return [
            AgnosticParams(l, c, k, m)
            for l, c, k, m in itertools.product(
                self.l_values, self.c_values, self.k_values, self.m_values
            )
        ]


def default_grid(
    image_min_dim: int,
    element_min_dim: int,
    preset: str = "coarse",
) -> SearchGrid:
    """Preset grids clipped to the image and element bounds.

    coarse: small two-stage grid sized so a full search stays interactive.
    fine: denser single-stage sweep. paper-literal-subset: 0.1-step L/C
    around mid-range with every legal kernel/mask value; expressible but
    far too large to run routinely.
    """
    k_cap = max(1, image_min_dim if image_min_dim % 2 else image_min_dim - 1)
    m_cap = max(1, element_min_dim)
    if preset == "coarse":
        l_vals = (0.0, 25.0, 50.0, 75.0, 100.0)
        c_vals = (0.0, 50.0, 100.0)
        k_vals = tuple(k for k in (1, 9, 17) if k <= k_cap) or (1,)
        m_vals = tuple(m for m in (2, 6, 12) if m <= m_cap) or (m_cap,)
        return SearchGrid(l_vals, c_vals, k_vals, m_vals, "coarse-then-refine")
    if preset == "fine":
        l_vals = tuple(float(v) for v in range(0, 101, 10))
        c_vals = tuple(float(v) for v in range(0, 101, 10))
        k_vals = tuple(k for k in (1, 5, 9, 13, 17, 21) if k <= k_cap) or (1,)
        m_vals = tuple(m for m in (2, 4, 6, 8, 12, 16) if m <= m_cap) or (m_cap,)
        return SearchGrid(l_vals, c_vals, k_vals, m_vals, "single-pass")
    if preset == "paper-literal-subset":
        l_vals = tuple(round(v / 10.0, 1) for v in range(300, 701))
        c_vals = tuple(round(v / 10.0, 1) for v in range(300, 701))
        k_vals = tuple(range(1, k_cap + 1, 2))
        m_vals = tuple(range(1, m_cap + 1))
        return SearchGrid(l_vals, c_vals, k_vals, m_vals, "single-pass")
    raise ValueError(f"unknown grid preset {preset!r}")


@dataclass(frozen=True, eq=False)
class ScoredCandidate:
    params: AgnosticParams
    scores: GapScores
    protected_image: RasterImage


@dataclass(frozen=True, eq=False)
class ProtectedBundle:
    original: RasterImage
    decoy: RasterImage
    protected: RasterImage
    best: ScoredCandidate
    previews: Mapping[str, PerceivedPair]
    evaluated: int


def _tie_key(params: AgnosticParams, score: float) -> tuple:
    """Max-ordering key: score, then smaller kernel, larger mask area,
    L then C closest to 50, finally ascending (L, C) to settle mirrors."""
    return (
        score,
        -params.kernel_size,
        params.mask_area,
        -abs(params.decoy_l - 50.0),
        -abs(params.decoy_c - 50.0),
        -params.decoy_l,
        -params.decoy_c,
    )


# ---------------------------------------------------------------------------
# Candidate construction


def _decoy_layer(
    decoy_geom: DecoyGeometry,
    hue_plan: Sequence[float],
    decoy_l: float,
    decoy_c: float,
) -> list[Mark]:
    if len(hue_plan) != len(decoy_geom.marks):
        raise ValueError("hue plan must cover every decoy mark")
    marks = []
    for mark, hue in zip(decoy_geom.marks, hue_plan):
        rgb, _ = lch_to_srgb(LchColor(decoy_l, decoy_c, hue))
        marks.append(replace(mark, color=rgb))
    return marks


def mask_marks(
    layer: RasterImage,
    marks: Sequence[Mark],
    footprints: Sequence[np.ndarray],
    pattern: MaskPattern,
) -> RasterImage:
    """Apply the pattern to each mark in order on a single layer copy.

    Equivalent to chaining apply_mask per mark (clears accumulate across
    overlapping marks) but without the per-call image copies.
    """
    px = layer.to_rgba().pixels.copy()
    h, w = px.shape[:2]
    for mark, fp in zip(marks, footprints):
        clipped = _clip_rect(mark.bbox, w, h)
        if clipped is None:
            continue
        keep = pattern.keep_grid(clipped.w, clipped.h)
        window_fp = fp[clipped.y : clipped.y2, clipped.x : clipped.x2]
        clear = ~keep & window_fp
        px[clipped.y : clipped.y2, clipped.x : clipped.x2, 3][clear] = 0
    return RasterImage(px)


def build_candidate(
    orig_img: RasterImage,
    orig_geom: GeometrySet,
    decoy_geom: DecoyGeometry,
    hue_plan: Sequence[float],
    params: AgnosticParams,
    background: RGB = WHITE,
    pattern_phase: str = "keep-first",
    pattern_orientation: str = "checkerboard",
) -> tuple[RasterImage, RasterImage]:
    """Compose one protected image; returns (protected, flattened decoy).

    The decoy marks are drawn in LCH (params.decoy_l, params.decoy_c,
    planned hue), blurred by kernel_size; every original mark is
    mask-patterned at cell size mask_area; the two layers go over the
    background. Deterministic for fixed inputs.
    """
    w, h = orig_img.width, orig_img.height
    colored = _decoy_layer(decoy_geom, hue_plan, params.decoy_l, params.decoy_c)
    decoy_layer = gaussian_blur(render_marks(colored, w, h), params.kernel_size)

    pattern = MaskPattern(params.mask_area, pattern_phase, pattern_orientation)
    footprints = [mark_footprint(m, w, h) for m in orig_geom.elements]
    orig_layer = mask_marks(render_marks(orig_geom.elements, w, h),
                            orig_geom.elements, footprints, pattern)

    protected = composite(background, decoy_layer, orig_layer)
    decoy_flat = composite(background, decoy_layer, RasterImage.blank(w, h))
    return protected, decoy_flat


def _clip_rect(bb: Rect, width: int, height: int) -> Rect | None:
    x0, y0 = max(0, bb.x), max(0, bb.y)
    x1, y1 = min(width, bb.x2), min(height, bb.y2)
    if x0 >= x1 or y0 >= y1:
        return None
    return Rect(x0, y0, x1 - x0, y1 - y0)


def evaluate_candidate(
    orig_img: RasterImage,
    decoy_flat: RasterImage,
    protected: RasterImage,
    ctx_close: ViewingContext,
    ctx_far: ViewingContext,
    alpha: float = 0.5,
    beta: float = 0.5,
) -> GapScores:
    """Score one composite: perceive all three images at both distances,
    then take the similarity gaps."""
    dims = {(im.width, im.height) for im in (orig_img, decoy_flat, protected)}
    if len(dims) != 1:
        raise ValueError(f"images differ in native size: {dims}")
    orig_pair = perceive(orig_img, ctx_close, ctx_far)
    decoy_pair = perceive(decoy_flat, ctx_close, ctx_far)
    prot_pair = perceive(protected, ctx_close, ctx_far)
    return _gaps_prepared(orig_pair, decoy_pair, prot_pair, alpha, beta)


def _gaps_prepared(orig_pair, decoy_pair, prot_pair, alpha, beta,
                   orig_prep=None) -> GapScores:
    if orig_prep is None:
        orig_prep = (vsi_prepare(orig_pair.close), vsi_prepare(orig_pair.far))
    gap1 = vsi_prepared(orig_prep[0], vsi_prepare(prot_pair.close)) - vsi_prepared(
        orig_prep[1], vsi_prepare(prot_pair.far)
    )
    gap2 = ms_ssim(decoy_pair.far, prot_pair.far) - ms_ssim(decoy_pair.close, prot_pair.close)
    return GapScores(gap1=gap1, gap2=gap2, score=alpha * gap1 + beta * gap2,
                     alpha=alpha, beta=beta)


# ---------------------------------------------------------------------------
# Search


class _CandidateFactory:
    """Shared per-search caches: footprints, masked layers, decoy pairs."""

    def __init__(self, orig_img, orig_geom, decoy_geom, hue_plan, background,
                 ctx_close, ctx_far, pattern_phase, pattern_orientation):
        self.orig_img = orig_img
        self.orig_geom = orig_geom
        self.decoy_geom = decoy_geom
        self.hue_plan = list(hue_plan)
        self.background = background
        self.ctx_close = ctx_close
        self.ctx_far = ctx_far
        self.pattern_phase = pattern_phase
        self.pattern_orientation = pattern_orientation
        w, h = orig_img.width, orig_img.height
        self.size = (w, h)
        self.orig_layer = render_marks(orig_geom.elements, w, h)
        self.orig_footprints = [mark_footprint(m, w, h) for m in orig_geom.elements]
        self.decoy_footprints = [mark_footprint(m, w, h) for m in decoy_geom.marks]
        self.orig_pair = perceive(orig_img, ctx_close, ctx_far)
        self.orig_prep = (vsi_prepare(self.orig_pair.close), vsi_prepare(self.orig_pair.far))
        self._masked: dict[int, RasterImage] = {}
        self._decoy: dict[
            tuple[float, float, int], tuple[RasterImage, RasterImage, PerceivedPair]
        ] = {}

    def masked_original(self, mask_area: int) -> RasterImage:
        layer = self._masked.get(mask_area)
        if layer is None:
            pattern = MaskPattern(mask_area, self.pattern_phase, self.pattern_orientation)
            layer = mask_marks(self.orig_layer, self.orig_geom.elements,
                               self.orig_footprints, pattern)
            self._masked[mask_area] = layer
        return layer

    def _paint_decoy(self, l: float, c: float) -> RasterImage:
        w, h = self.size
        canvas = np.zeros((h, w, 4), dtype=np.uint8)
        for fp, hue in zip(self.decoy_footprints, self.hue_plan):
            rgb, _ = lch_to_srgb(LchColor(l, c, hue))
            canvas[fp] = (*rgb, 255)
        return RasterImage(canvas)

    def decoy_parts(
        self, l: float, c: float, k: int
    ) -> tuple[RasterImage, RasterImage, PerceivedPair]:
        key = (l, c, k)
        entry = self._decoy.get(key)
        if entry is None:
            w, h = self.size
            layer = gaussian_blur(self._paint_decoy(l, c), k)
            flat = composite(self.background, layer, RasterImage.blank(w, h))
            pair = perceive(flat, self.ctx_close, self.ctx_far)
            entry = (layer, flat, pair)
            self._decoy[key] = entry
        return entry

    def evaluate(self, params: AgnosticParams, alpha: float, beta: float) -> ScoredCandidate:
        _layer, flat, decoy_pair = self.decoy_parts(
            params.decoy_l, params.decoy_c, params.kernel_size
        )
        masked = self.masked_original(params.mask_area)
        # the masked layer's alpha is binary (marks 255, cleared cells 0),
        # so source-over degenerates to a select; bit-exact vs composite()
        sel = masked.pixels[..., 3:4] == 255
        protected = RasterImage(
            np.where(sel, masked.pixels[..., :3], flat.pixels).astype(np.uint8)
        )
        prot_pair = perceive(protected, self.ctx_close, self.ctx_far)
        scores = _gaps_prepared(self.orig_pair, decoy_pair, prot_pair, alpha, beta,
                                orig_prep=self.orig_prep)
        return ScoredCandidate(params=params, scores=scores, protected_image=protected)

    def flat_decoy_image(self, params: AgnosticParams) -> RasterImage:
        return self.decoy_parts(params.decoy_l, params.decoy_c, params.kernel_size)[1]


def _refine_values(values: Sequence[float | int], winner, integral: bool,
                   odd: bool = False) -> list:
    """Winner plus midpoints toward its grid neighbors, deduplicated."""
    vals = list(values)
    i = vals.index(winner)
    out = {winner}
    for j in (i - 1, i + 1):
        if 0 <= j < len(vals):
            mid = (winner + vals[j]) / 2.0
            if odd:
                mid = int(round((mid - 1) / 2.0)) * 2 + 1
                mid = max(1, mid)
            elif integral:
                mid = max(1, int(round(mid)))
            out.add(mid)
    return sorted(out)


def optimize(
    orig_img: RasterImage,
    orig_geom: GeometrySet,
    decoy_geom: DecoyGeometry,
    hue_plan: Sequence[float],
    grid: SearchGrid,
    ctx_close: ViewingContext,
    ctx_far: ViewingContext,
    alpha: float = 0.5,
    beta: float = 0.5,
    background: RGB = WHITE,
    pattern_phase: str = "keep-first",
    pattern_orientation: str = "checkerboard",
) -> ProtectedBundle:
    """Exhaustively score the grid and return the best candidate's bundle.

    Ties break toward smaller kernel, larger mask area, then L and C
    closest to 50 (ascending L, C as the final disambiguator), so the
    result never depends on evaluation order. In coarse-then-refine mode a
    second pass subdivides the winning cell's neighborhood once.
    """
    if grid.size == 0:
        raise ValueError("empty search grid")
    factory = _CandidateFactory(orig_img, orig_geom, decoy_geom, hue_plan, background,
                                ctx_close, ctx_far, pattern_phase, pattern_orientation)
    evaluated: dict[AgnosticParams, ScoredCandidate] = {}

    def run(points: Iterable[AgnosticParams]) -> None:
        for p in points:
            if p not in evaluated:
                evaluated[p] = factory.evaluate(p, alpha, beta)

    run(grid.points())
    best = max(evaluated.values(), key=lambda c: _tie_key(c.params, c.scores.score))

    if grid.stage_plan == "coarse-then-refine":
        w = best.params
        refine = SearchGrid(
            tuple(_refine_values(grid.l_values, w.decoy_l, integral=False)),
            tuple(_refine_values(grid.c_values, w.decoy_c, integral=False)),
            tuple(_refine_values(grid.k_values, w.kernel_size, integral=True, odd=True)),
            tuple(_refine_values(grid.m_values, w.mask_area, integral=True)),
            "single-pass",
        )
        run(refine.points())
        best = max(evaluated.values(), key=lambda c: _tie_key(c.params, c.scores.score))

    prot_pair = perceive(best.protected_image, ctx_close, ctx_far)
    decoy_img = factory.flat_decoy_image(best.params)
    previews = {
        "original": factory.orig_pair,
        "decoy": perceive(decoy_img, ctx_close, ctx_far),
        "protected": prot_pair,
    }
    return ProtectedBundle(
        original=orig_img,
        decoy=decoy_img,
        protected=best.protected_image,
        best=best,
        previews=previews,
        evaluated=len(evaluated),
    )


def oracle_enumerate(
    orig_img: RasterImage,
    orig_geom: GeometrySet,
    decoy_geom: DecoyGeometry,
    hue_plan: Sequence[float],
    grid: SearchGrid,
    ctx_close: ViewingContext,
    ctx_far: ViewingContext,
    alpha: float = 0.5,
    beta: float = 0.5,
    background: RGB = WHITE,
    pattern_phase: str = "keep-first",
    pattern_orientation: str = "checkerboard",
) -> list[ScoredCandidate]:
    """Uncached full enumeration, sorted best-first under the same tie-break.

    Deliberately goes through the slow standalone build/evaluate path so it
    double-checks both the search and its caches; capped at 1000 points.
    """
    if grid.size > 1000:
        raise ValueError(f"oracle grid too large: {grid.size} > 1000")
    out: list[ScoredCandidate] = []
    for params in grid.points():
        protected, decoy_flat = build_candidate(
            orig_img, orig_geom, decoy_geom, hue_plan, params, background,
            pattern_phase, pattern_orientation,
        )
        scores = evaluate_candidate(orig_img, decoy_flat, protected,
                                    ctx_close, ctx_far, alpha, beta)
        out.append(ScoredCandidate(params=params, scores=scores, protected_image=protected))
    out.sort(key=lambda c: _tie_key(c.params, c.scores.score), reverse=True)
    return out
