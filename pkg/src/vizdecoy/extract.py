"""Mark geometry recovered from raster charts.

Line charts go through a (rho, theta) Hough accumulator, scatter plots
through a 3-D circle accumulator over boundary pixels, and bar charts
through per-color connected components. All detectors treat the bright
side of an Otsu split of luminance as background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .charts import BarRect
from .raster import RGB, RasterImage


class ExtractionError(ValueError):
    """Raster input cannot be turned into usable geometry."""


@dataclass(frozen=True)
class LineDetection:
    """Normal-form line: rho = x*cos(theta) + y*sin(theta), theta in [0, 180) deg."""

    rho: float
    theta: float
    endpoints: tuple[float, float, float, float]
    votes: int

    @property
    def tilt(self) -> float:
        """Visual tilt of the line in degrees, up-positive, in (-90, 90]."""
        ang = (90.0 - self.theta) % 180.0
        return ang - 180.0 if ang > 90.0 else ang


@dataclass(frozen=True)
class DotDetection:
    cx: float
    cy: float
    r: float
    score: float


def _luminance(img: RasterImage) -> np.ndarray:
    px = img.pixels[..., :3].astype(np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def otsu_threshold(values: np.ndarray) -> float:
    """Threshold maximizing inter-class variance over a 256-bin histogram."""
    hist, _ = np.histogram(values, bins=256, range=(0, 256))
    total = hist.sum()
    if total == 0:
        return 0.0
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    mu_cum = np.cumsum(hist * levels)
    mu_total = mu_cum[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = mu_cum / w0
        mu1 = (mu_total - mu_cum) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    return float(np.argmax(between))


def foreground_mask(img: RasterImage) -> np.ndarray:
    """True for mark pixels, False for background.

    When one color dominates the image (>= 30% of pixels, the usual flat
    chart background), every pixel differing from it is foreground. Without
    a dominant color the dark side of an Otsu luminance split is used; pure
    Otsu is unreliable on charts because the huge background class can pull
    the threshold into the middle of the mark luminances.
    """
    lum = _luminance(img)
    if lum.max() - lum.min() < 1e-9:
        return np.zeros(lum.shape, dtype=bool)
    px = img.pixels[..., :3]
    flat = px.reshape(-1, 3)
    colors, counts = np.unique(flat, axis=0, return_counts=True)
    top = np.argmax(counts)
    if counts[top] >= 0.3 * len(flat):
        return np.any(px != colors[top], axis=-1)
    return lum <= otsu_threshold(lum)


# ---------------------------------------------------------------------------
# Lines


def hough_lines(
    img: RasterImage,
    vote_threshold: int,
    angle_step: float = 1.0,
    rho_step: float = 1.0,
) -> list[LineDetection]:
    """Peak lines of the standard normal-parameterization accumulator.

    Peaks need at least vote_threshold votes and must be 3x3 local maxima;
    plateau duplicates are greedily suppressed. Endpoints come from the
    extreme foreground pixels within 1.5 px of each peak line.
    """
    if angle_step <= 0 or rho_step <= 0:
        raise ValueError("angle_step and rho_step must be positive")
    fg = foreground_mask(img)
    ys, xs = np.nonzero(fg)
    if len(xs) == 0:
        return []
    xs_f = xs.astype(np.float64)
    ys_f = ys.astype(np.float64)

    thetas = np.arange(0.0, 180.0, angle_step)
    diag = math.hypot(img.width, img.height)
    n_rho = int(math.ceil(2 * diag / rho_step)) + 1
    acc = np.zeros((len(thetas), n_rho), dtype=np.int64)
    cos_t = np.cos(np.radians(thetas))
    sin_t = np.sin(np.radians(thetas))
    for ti in range(len(thetas)):
        rho = xs_f * cos_t[ti] + ys_f * sin_t[ti]
        idx = np.rint((rho + diag) / rho_step).astype(np.int64)
        acc[ti] = np.bincount(idx, minlength=n_rho)

    local_max = acc == ndimage.maximum_filter(acc, size=3, mode="constant")
    cand = np.argwhere(local_max & (acc >= vote_threshold))
    cand = sorted(cand.tolist(), key=lambda c: (-acc[c[0], c[1]], c[0], c[1]))

    detections: list[LineDetection] = []
    taken: list[tuple[int, int]] = []
    for ti, ri in cand:
        if any(abs(ti - t) <= 1 and abs(ri - r) <= 1 for t, r in taken):
            continue
        taken.append((ti, ri))
        theta = float(thetas[ti])
        rho = ri * rho_step - diag
        d = np.abs(xs_f * cos_t[ti] + ys_f * sin_t[ti] - rho)
        on_line = d <= 1.5
        if not np.any(on_line):
            continue
        # position along the line's direction vector (-sin, cos)
        t_coord = -xs_f[on_line] * sin_t[ti] + ys_f[on_line] * cos_t[ti]
        lo, hi = np.argmin(t_coord), np.argmax(t_coord)
        lx, ly = xs_f[on_line][lo], ys_f[on_line][lo]
        hx, hy = xs_f[on_line][hi], ys_f[on_line][hi]
        detections.append(
            LineDetection(
                rho=rho,
                theta=theta,
                endpoints=(float(lx), float(ly), float(hx), float(hy)),
                votes=int(acc[ti, ri]),
            )
        )
    return detections


# ---------------------------------------------------------------------------
# Circles


def _ring_offsets(r: int, half_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets whose distance from the origin is within half_width of r."""
    rng = np.arange(-r - 2, r + 3)
    dx, dy = np.meshgrid(rng, rng)
    dist = np.hypot(dx, dy)
    sel = np.abs(dist - r) < half_width
    return dx[sel], dy[sel]


def hough_circles(
    img: RasterImage,
    r_min: int,
    r_max: int,
    score_threshold: float = 0.5,
    require_filled: bool = True,
) -> list[DotDetection]:
    """Centers and radii from a 3-D (cx, cy, r) accumulator over boundary pixels.

    Each boundary pixel votes for centers within 1 px of radius r (a digital
    disk's one-pixel boundary straddles two radius bins, so the vote band is
    wider than the bin). Scores are normalized by the theoretical perimeter
    pixel count of radius r; detections need score >= score_threshold, and
    overlapping detections (center distance < r_min) are suppressed in
    score order.

    With require_filled (the default - chart dots are filled disks), a
    candidate survives only when >= 90% of the pixels inside radius r - 1
    are foreground, which rejects ring-shaped coincidences over axis lines
    and text glyphs.
    """
    if not (1 <= r_min <= r_max <= min(img.width, img.height) / 2):
        raise ValueError(
            f"invalid radius range [{r_min}, {r_max}] for {img.width}x{img.height} image"
        )
    fg = foreground_mask(img)
    if not fg.any():
        return []
    interior = (
        np.roll(fg, 1, 0) & np.roll(fg, -1, 0) & np.roll(fg, 1, 1) & np.roll(fg, -1, 1)
    )
    # border pixels of the image count as boundary when foreground
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    edge = fg & ~interior
    ys, xs = np.nonzero(edge)

    h, w = fg.shape
    candidates: list[tuple[float, int, int, int, int]] = []
    for r in range(r_min, r_max + 1):
        dx, dy = _ring_offsets(r, 1.0)
        perimeter = len(_ring_offsets(r, 0.5)[0])
        cx = (xs[:, None] + dx[None, :]).ravel()
        cy = (ys[:, None] + dy[None, :]).ravel()
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        acc = np.zeros((h, w), dtype=np.int64)
        np.add.at(acc, (cy[ok], cx[ok]), 1)
        peak = acc >= score_threshold * perimeter
        for py, px in np.argwhere(peak):
            if require_filled and not _disk_filled(fg, int(px), int(py), r):
                continue
            candidates.append((acc[py, px] / perimeter, int(acc[py, px]), int(px), int(py), r))

    candidates.sort(key=lambda c: (-c[0], c[3], c[2], c[4]))
    detections: list[DotDetection] = []
    for score, _votes, px, py, r in candidates:
        if any(
            math.hypot(px - d.cx, py - d.cy) < max(r_min, d.r) for d in detections
        ):
            continue
        detections.append(DotDetection(cx=float(px), cy=float(py), r=float(r), score=score))
    return detections


def _disk_filled(fg: np.ndarray, px: int, py: int, r: int, min_fill: float = 0.9) -> bool:
    rr = max(1, r - 1)
    rng = np.arange(-rr, rr + 1)
    dx, dy = np.meshgrid(rng, rng)
    sel = dx**2 + dy**2 <= rr**2
    cx = px + dx[sel]
    cy = py + dy[sel]
    h, w = fg.shape
    ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    if ok.sum() == 0:
        return False
    return fg[cy[ok], cx[ok]].mean() >= min_fill


# ---------------------------------------------------------------------------
# Bars


def extract_bars(img: RasterImage, background: RGB) -> list[BarRect]:
    """Filled axis-aligned rectangles as per-color connected components.

    A component is a bar when its bounding-box fill ratio is >= 0.95 and it
    is at least 3 px in both dimensions (thinner components are line work).
    Results are sorted by x.
    """
    px = img.pixels[..., :3]
    non_bg = np.any(px != np.asarray(background, dtype=np.uint8), axis=-1)
    if img.has_alpha:
        non_bg &= img.pixels[..., 3] > 0
    if not non_bg.any():
        return []

    colors = np.unique(px[non_bg].reshape(-1, 3), axis=0)
    bars: list[BarRect] = []
    for color in colors:
        mask = np.all(px == color, axis=-1) & non_bg
        labels, count = ndimage.label(mask)
        for sl_y, sl_x in ndimage.find_objects(labels):
            w = sl_x.stop - sl_x.start
            h = sl_y.stop - sl_y.start
            if w < 3 or h < 3:
                continue
            filled = int(mask[sl_y, sl_x].sum())
            if filled / (w * h) >= 0.95:
                bars.append(
                    BarRect(sl_x.start, sl_y.start, w, h, tuple(int(c) for c in color))
                )
    bars.sort(key=lambda b: (b.x, b.y))
    return bars


def detections_to_json(
    lines: list[LineDetection] | None = None,
    dots: list[DotDetection] | None = None,
    bars: list[BarRect] | None = None,
) -> dict:
    doc: dict = {}
    if lines is not None:
        doc["lines"] = [
            {"rho": d.rho, "theta": d.theta, "endpoints": list(d.endpoints),
             "votes": d.votes, "tilt": d.tilt}
            for d in lines
        ]
    if dots is not None:
        doc["dots"] = [{"cx": d.cx, "cy": d.cy, "r": d.r, "score": d.score} for d in dots]
    if bars is not None:
        doc["bars"] = [
            {"x": b.x, "y": b.y, "w": b.w, "h": b.h, "color": list(b.color)} for b in bars
        ]
    return doc
