"""Declarative chart specs rendered to rasters with exact mark geometry.

Four chart types: bar, line, scatter, pie. Rendering is deterministic and,
by default, unantialiased so every mark's pixel footprint is exactly
recoverable; the returned geometry lists the drawn marks (data marks plus
auxiliary axes/ticks/labels) in draw order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .raster import RGB, RasterImage, Rect, resample

CHART_TYPES = ("bar", "line", "scatter", "pie")

DEFAULT_PALETTE: tuple[RGB, ...] = (
    (76, 120, 168),
    (245, 133, 24),
    (84, 162, 75),
    (228, 87, 86),
    (114, 183, 178),
    (238, 202, 59),
)
AXIS_COLOR: RGB = (40, 40, 40)
LINE_THICKNESS = 3.0


class ChartSpecError(ValueError):
    """A chart spec violates one of its invariants."""


@dataclass(frozen=True)
class Margins:
    left: int = 40
    right: int = 20
    top: int = 20
    bottom: int = 30


@dataclass(frozen=True)
class ChartSpec:
    chart_type: str
    canvas_width: int
    canvas_height: int
    margins: Margins = Margins()
    palette: tuple[RGB, ...] = DEFAULT_PALETTE
    bar_heights: tuple[float, ...] | None = None
    labels: tuple[str, ...] | None = None
    line_series: tuple[tuple[tuple[float, float], ...], ...] | None = None
    scatter_points: tuple[tuple[float, float, float], ...] | None = None
    pie_fractions: tuple[float, ...] | None = None


# ---------------------------------------------------------------------------
# Marks


@dataclass(frozen=True)
class BarRect:
    x: float
    y: float
    w: float
    h: float
    color: RGB
    auxiliary: bool = False

    @property
    def bbox(self) -> Rect:
        return _bbox(self.x, self.y, self.x + self.w, self.y + self.h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float
    thickness: float
    color: RGB
    auxiliary: bool = False

    @property
    def tilt(self) -> float:
        """Visual tilt in degrees, up-positive, in (-90, 90]."""
        ang = math.degrees(math.atan2(-(self.y1 - self.y0), self.x1 - self.x0))
        ang = (ang + 90.0) % 180.0 - 90.0
        return 90.0 if ang == -90.0 else ang

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def bbox(self) -> Rect:
        r = self.thickness / 2.0
        return _bbox(
            min(self.x0, self.x1) - r,
            min(self.y0, self.y1) - r,
            max(self.x0, self.x1) + r,
            max(self.y0, self.y1) + r,
        )

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


@dataclass(frozen=True)
class Dot:
    cx: float
    cy: float
    r: float
    color: RGB
    auxiliary: bool = False

    @property
    def bbox(self) -> Rect:
        return _bbox(self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)


@dataclass(frozen=True)
class Slice:
    """Pie wedge; angles in degrees clockwise from 12 o'clock."""

    cx: float
    cy: float
    radius: float
    start_angle: float
    sweep_angle: float
    color: RGB
    auxiliary: bool = False

    @property
    def bbox(self) -> Rect:
        r = self.radius
        return _bbox(self.cx - r, self.cy - r, self.cx + r, self.cy + r)

    @property
    def mid_angle(self) -> float:
        return (self.start_angle + self.sweep_angle / 2.0) % 360.0

    @property
    def center(self) -> tuple[float, float]:
        ang = math.radians(self.mid_angle)
        rr = 0.6 * self.radius
        return (self.cx + rr * math.sin(ang), self.cy - rr * math.cos(ang))


Mark = Union[BarRect, Segment, Dot, Slice]


def _bbox(x0: float, y0: float, x1: float, y1: float) -> Rect:
    xa, ya = int(math.floor(x0)), int(math.floor(y0))
    xb, yb = int(math.ceil(x1)), int(math.ceil(y1))
    return Rect(xa, ya, max(1, xb - xa), max(1, yb - ya))


@dataclass(frozen=True)
class GeometrySet:
    chart_type: str
    elements: tuple[Mark, ...]
    plot_rect: Rect
    element_extent: tuple[int, int]

    @property
    def data_marks(self) -> tuple[Mark, ...]:
        return tuple(m for m in self.elements if not m.auxiliary)


def element_extent(marks: Sequence[Mark]) -> tuple[int, int]:
    """(V_w, V_h): minimum bounding width/height over the data marks."""
    data = [m for m in marks if not m.auxiliary]
    if not data:
        return (1, 1)
    v_w = min(m.bbox.w for m in data)
    v_h = min(m.bbox.h for m in data)
    return (max(1, v_w), max(1, v_h))


# ---------------------------------------------------------------------------
# Validation


def validate_spec(spec: ChartSpec) -> None:
    """Raise ChartSpecError naming the first violated invariant."""
    if spec.chart_type not in CHART_TYPES:
        raise ChartSpecError(f"unknown chart type {spec.chart_type!r}")
    if spec.canvas_width <= 0 or spec.canvas_height <= 0:
        raise ChartSpecError("non-positive canvas")
    m = spec.margins
    if min(m.left, m.right, m.top, m.bottom) < 0:
        raise ChartSpecError("negative margin")
    if m.left + m.right >= spec.canvas_width or m.top + m.bottom >= spec.canvas_height:
        raise ChartSpecError("margins not strictly inside canvas")
    if not spec.palette:
        raise ChartSpecError("empty palette")
    for col in spec.palette:
        if len(col) != 3 or any(not (0 <= int(ch) <= 255) for ch in col):
            raise ChartSpecError(f"invalid palette color {col!r}")

    data_fields = {
        "bar": spec.bar_heights,
        "line": spec.line_series,
        "scatter": spec.scatter_points,
        "pie": spec.pie_fractions,
    }
    data = data_fields[spec.chart_type]
    if data is None or len(data) == 0:
        raise ChartSpecError("empty data")

    if spec.chart_type == "bar":
        if any(h < 0 for h in spec.bar_heights):
            raise ChartSpecError("negative bar height")
        if max(spec.bar_heights) == 0:
            raise ChartSpecError("all-zero bar heights")
    elif spec.chart_type == "line":
        for series in spec.line_series:
            if len(series) < 2:
                raise ChartSpecError("line series needs at least 2 points")
            if any(y < 0 for _, y in series):
                raise ChartSpecError("negative line value")
        if max(y for s in spec.line_series for _, y in s) == 0:
            raise ChartSpecError("all-zero line values")
    elif spec.chart_type == "scatter":
        if any(r <= 0 for _, _, r in spec.scatter_points):
            raise ChartSpecError("non-positive dot radius")
        if any(x < 0 or y < 0 for x, y, _ in spec.scatter_points):
            raise ChartSpecError("negative scatter value")
        if max(y for _, y, _ in spec.scatter_points) == 0:
            raise ChartSpecError("all-zero scatter values")
    elif spec.chart_type == "pie":
        if any(f <= 0 for f in spec.pie_fractions):
            raise ChartSpecError("non-positive pie fraction")


# ---------------------------------------------------------------------------
# Rasterization

# 3x5 bitmap glyphs for tick labels; each glyph is 5 rows of 3 cells.
_FONT: dict[str, tuple[str, ...]] = {
    "0": ("###", "#.#", "#.#", "#.#", "###"),
    "1": (".#.", "##.", ".#.", ".#.", "###"),
    "2": ("###", "..#", "###", "#..", "###"),
    "3": ("###", "..#", ".##", "..#", "###"),
    "4": ("#.#", "#.#", "###", "..#", "..#"),
    "5": ("###", "#..", "###", "..#", "###"),
    "6": ("###", "#..", "###", "#.#", "###"),
    "7": ("###", "..#", ".#.", ".#.", ".#."),
    "8": ("###", "#.#", "###", "#.#", "###"),
    "9": ("###", "#.#", "###", "..#", "###"),
    ".": ("...", "...", "...", "...", ".#."),
    "-": ("...", "...", "###", "...", "..."),
}
_GLYPH_W, _GLYPH_H = 3, 5


def _text_marks(text: str, x: float, y: float, color: RGB) -> list[BarRect]:
    """Render text as 1-px-high auxiliary rects (one per horizontal glyph run)."""
    marks: list[BarRect] = []
    cx = x
    for ch in text:
        glyph = _FONT.get(ch)
        if glyph is None:
            cx += _GLYPH_W + 1
            continue
        for row, bits in enumerate(glyph):
            col = 0
            while col < _GLYPH_W:
                if bits[col] == "#":
                    run = col
                    while run < _GLYPH_W and bits[run] == "#":
                        run += 1
                    marks.append(
                        BarRect(cx + col, y + row, run - col, 1, color, auxiliary=True)
                    )
                    col = run
                else:
                    col += 1
        cx += _GLYPH_W + 1
    return marks


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def mark_footprint(mark: Mark, width: int, height: int) -> np.ndarray:
    """Boolean (height, width) pixel-ownership mask via pixel-center tests."""
    out = np.zeros((height, width), dtype=bool)
    bb = mark.bbox
    x0, y0 = max(0, bb.x), max(0, bb.y)
    x1, y1 = min(width, bb.x2), min(height, bb.y2)
    if x0 >= x1 or y0 >= y1:
        return out
    xs = np.arange(x0, x1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)

    if isinstance(mark, BarRect):
        inside = (px >= mark.x) & (px < mark.x + mark.w) & (py >= mark.y) & (py < mark.y + mark.h)
    elif isinstance(mark, Dot):
        inside = (px - mark.cx) ** 2 + (py - mark.cy) ** 2 <= mark.r**2
    elif isinstance(mark, Segment):
        dx, dy = mark.x1 - mark.x0, mark.y1 - mark.y0
        ll = dx * dx + dy * dy
        if ll == 0:
            dist2 = (px - mark.x0) ** 2 + (py - mark.y0) ** 2
        else:
            t = np.clip(((px - mark.x0) * dx + (py - mark.y0) * dy) / ll, 0.0, 1.0)
            dist2 = (px - (mark.x0 + t * dx)) ** 2 + (py - (mark.y0 + t * dy)) ** 2
        inside = dist2 <= (mark.thickness / 2.0) ** 2
    elif isinstance(mark, Slice):
        dxp, dyp = px - mark.cx, py - mark.cy
        dist2 = dxp**2 + dyp**2
        ang = np.degrees(np.arctan2(dxp, -dyp)) % 360.0
        rel = (ang - mark.start_angle) % 360.0
        inside = (dist2 <= mark.radius**2) & (rel < mark.sweep_angle)
    else:  # pragma: no cover
        raise TypeError(f"unknown mark type {type(mark)!r}")

    out[y0:y1, x0:x1] = inside
    return out


def render_marks(
    marks: Sequence[Mark],
    width: int,
    height: int,
    background: RGB | None = None,
) -> RasterImage:
    """Draw marks in order onto a canvas.

    With background=None the result is an RGBA layer, transparent where no
    mark lands; otherwise an opaque RGB image filled with the background.
    """
    if background is None:
        canvas = np.zeros((height, width, 4), dtype=np.uint8)
    else:
        canvas = np.empty((height, width, 3), dtype=np.uint8)
        canvas[:] = np.asarray(background, dtype=np.uint8)
    for mark in marks:
        fp = mark_footprint(mark, width, height)
        canvas[fp, 0] = mark.color[0]
        canvas[fp, 1] = mark.color[1]
        canvas[fp, 2] = mark.color[2]
        if background is None:
            canvas[fp, 3] = 255
    return RasterImage(canvas)


# ---------------------------------------------------------------------------
# Chart construction


def _bar_marks(spec: ChartSpec, plot: Rect) -> list[Mark]:
    heights = spec.bar_heights
    n = len(heights)
    vmax = max(heights)
    slot = plot.w / n
    bar_w = max(1, int(round(0.7 * slot)))
    marks: list[Mark] = []
    for i, h in enumerate(heights):
        h_px = int(round(h / vmax * plot.h))
        if h_px == 0:
            continue
        x = int(round(plot.x + i * slot + (slot - bar_w) / 2.0))
        color = spec.palette[i % len(spec.palette)]
        marks.append(BarRect(x, plot.y2 - h_px, bar_w, h_px, color))
    return marks


def _line_marks(spec: ChartSpec, plot: Rect) -> list[Mark]:
    xs = [x for s in spec.line_series for x, _ in s]
    ymax = max(y for s in spec.line_series for _, y in s)
    xmin, xmax = min(xs), max(xs)
    xspan = xmax - xmin
    marks: list[Mark] = []
    for si, series in enumerate(spec.line_series):
        color = spec.palette[si % len(spec.palette)]
        pts = []
        for x, y in series:
            fx = 0.5 if xspan == 0 else (x - xmin) / xspan
            px = plot.x + fx * (plot.w - 1) + 0.5
            py = plot.y2 - y / ymax * (plot.h - 1) - 0.5
            pts.append((px, py))
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            marks.append(Segment(x0, y0, x1, y1, LINE_THICKNESS, color))
    return marks


def _scatter_marks(spec: ChartSpec, plot: Rect) -> list[Mark]:
    xmax = max(x for x, _, _ in spec.scatter_points)
    ymax = max(y for _, y, _ in spec.scatter_points)
    xmin = min(x for x, _, _ in spec.scatter_points)
    xspan = xmax - xmin
    marks: list[Mark] = []
    for i, (x, y, r) in enumerate(spec.scatter_points):
        fx = 0.5 if xspan == 0 else (x - xmin) / xspan
        px = plot.x + fx * (plot.w - 1) + 0.5
        py = plot.y2 - y / ymax * (plot.h - 1) - 0.5
        color = spec.palette[i % len(spec.palette)]
        marks.append(Dot(px, py, r, color))
    return marks


def _pie_marks(spec: ChartSpec, plot: Rect) -> list[Mark]:
    fr = np.asarray(spec.pie_fractions, dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(fr)])
    total = cum[-1]
    bounds = 360.0 * cum / total
    cx = plot.x + plot.w / 2.0
    cy = plot.y + plot.h / 2.0
    radius = 0.45 * min(plot.w, plot.h)
    marks: list[Mark] = []
    for i in range(len(fr)):
        color = spec.palette[i % len(spec.palette)]
        marks.append(
            Slice(cx, cy, radius, float(bounds[i]), float(bounds[i + 1] - bounds[i]), color)
        )
    return marks


def _axis_marks(spec: ChartSpec, plot: Rect) -> list[Mark]:
    """Axis lines on the plot border, ticks pointing inward, numeric labels."""
    marks: list[Mark] = []
    y_axis_x = plot.x + 0.5
    x_axis_y = plot.y2 - 0.5
    marks.append(Segment(y_axis_x, plot.y + 0.5, y_axis_x, x_axis_y, 1.0, AXIS_COLOR, auxiliary=True))
    marks.append(Segment(y_axis_x, x_axis_y, plot.x2 - 0.5, x_axis_y, 1.0, AXIS_COLOR, auxiliary=True))

    if spec.chart_type == "bar":
        vmax = max(spec.bar_heights)
    elif spec.chart_type == "line":
        vmax = max(y for s in spec.line_series for _, y in s)
    else:
        vmax = max(y for _, y, _ in spec.scatter_points)

    n_ticks = 4
    for t in range(1, n_ticks + 1):
        fy = t / n_ticks
        py = plot.y2 - fy * (plot.h - 1) - 0.5
        marks.append(Segment(y_axis_x, py, y_axis_x + 4, py, 1.0, AXIS_COLOR, auxiliary=True))
        label = _fmt_tick(round(fy * vmax, 2))
        marks.extend(_text_marks(label, plot.x + 7, py - _GLYPH_H / 2.0 + 0.5, AXIS_COLOR))
    for t in range(1, n_ticks):
        fx = t / n_ticks
        px = plot.x + fx * (plot.w - 1) + 0.5
        marks.append(Segment(px, x_axis_y - 4, px, x_axis_y, 1.0, AXIS_COLOR, auxiliary=True))
    return marks


def render_chart(spec: ChartSpec, antialias: bool = False) -> tuple[RasterImage, GeometrySet]:
    """Render a validated spec to an opaque raster plus its exact geometry.

    Marks are drawn aux-first so data marks sit on top. With antialias=True
    the raster is produced at 3x and box-downsampled (presentation only);
    the returned geometry always refers to 1x coordinates.
    """
    validate_spec(spec)
    m = spec.margins
    plot = Rect(m.left, m.top, spec.canvas_width - m.left - m.right,
                spec.canvas_height - m.top - m.bottom)

    builders = {"bar": _bar_marks, "line": _line_marks, "scatter": _scatter_marks,
                "pie": _pie_marks}
    data_marks = builders[spec.chart_type](spec, plot)
    aux_marks: list[Mark] = [] if spec.chart_type == "pie" else _axis_marks(spec, plot)
    marks = tuple(aux_marks + data_marks)

    if antialias:
        scaled = tuple(_scale_mark(mk, 3.0) for mk in marks)
        big = render_marks(scaled, 3 * spec.canvas_width, 3 * spec.canvas_height,
                           background=(255, 255, 255))
        img = resample(big, 1.0 / 3.0)
    else:
        img = render_marks(marks, spec.canvas_width, spec.canvas_height,
                           background=(255, 255, 255))
    geom = GeometrySet(spec.chart_type, marks, plot, element_extent(marks))
    return img, geom


def _scale_mark(mark: Mark, s: float) -> Mark:
    if isinstance(mark, BarRect):
        return replace(mark, x=mark.x * s, y=mark.y * s, w=mark.w * s, h=mark.h * s)
    if isinstance(mark, Segment):
        return replace(mark, x0=mark.x0 * s, y0=mark.y0 * s, x1=mark.x1 * s,
                       y1=mark.y1 * s, thickness=mark.thickness * s)
    if isinstance(mark, Dot):
        return replace(mark, cx=mark.cx * s, cy=mark.cy * s, r=mark.r * s)
    return replace(mark, cx=mark.cx * s, cy=mark.cy * s, radius=mark.radius * s)


# ---------------------------------------------------------------------------
# JSON serialization


def mark_to_json(m: Mark) -> dict:
    if isinstance(m, BarRect):
        doc = {"kind": "bar", "x": m.x, "y": m.y, "w": m.w, "h": m.h}
    elif isinstance(m, Segment):
        doc = {"kind": "segment", "x0": m.x0, "y0": m.y0, "x1": m.x1, "y1": m.y1,
               "thickness": m.thickness, "tilt": m.tilt}
    elif isinstance(m, Dot):
        doc = {"kind": "dot", "cx": m.cx, "cy": m.cy, "r": m.r}
    else:
        doc = {"kind": "slice", "cx": m.cx, "cy": m.cy, "radius": m.radius,
               "start_angle": m.start_angle, "sweep_angle": m.sweep_angle}
    doc["color"] = list(m.color)
    if m.auxiliary:
        doc["auxiliary"] = True
    return doc


def geometry_to_json(geom: GeometrySet) -> dict:
    return {
        "chart_type": geom.chart_type,
        "plot_rect": {"x": geom.plot_rect.x, "y": geom.plot_rect.y,
                      "w": geom.plot_rect.w, "h": geom.plot_rect.h},
        "element_extent": list(geom.element_extent),
        "elements": [mark_to_json(m) for m in geom.elements],
    }


def spec_to_json(spec: ChartSpec) -> dict:
    doc: dict = {
        "chart_type": spec.chart_type,
        "canvas_width": spec.canvas_width,
        "canvas_height": spec.canvas_height,
        "margins": {"left": spec.margins.left, "right": spec.margins.right,
                    "top": spec.margins.top, "bottom": spec.margins.bottom},
        "palette": [list(c) for c in spec.palette],
    }
    if spec.bar_heights is not None:
        doc["bar_heights"] = list(spec.bar_heights)
    if spec.labels is not None:
        doc["labels"] = list(spec.labels)
    if spec.line_series is not None:
        doc["line_series"] = [[list(p) for p in s] for s in spec.line_series]
    if spec.scatter_points is not None:
        doc["scatter_points"] = [list(p) for p in spec.scatter_points]
    if spec.pie_fractions is not None:
        doc["pie_fractions"] = list(spec.pie_fractions)
    return doc


def spec_from_json(doc: dict) -> ChartSpec:
    try:
        margins = Margins(**doc.get("margins", {}))
        palette = tuple(tuple(int(ch) for ch in c) for c in doc.get("palette", DEFAULT_PALETTE))
        spec = ChartSpec(
            chart_type=doc["chart_type"],
            canvas_width=int(doc["canvas_width"]),
            canvas_height=int(doc["canvas_height"]),
            margins=margins,
            palette=palette,
            bar_heights=tuple(doc["bar_heights"]) if "bar_heights" in doc else None,
            labels=tuple(doc["labels"]) if "labels" in doc else None,
            line_series=tuple(tuple(tuple(p) for p in s) for s in doc["line_series"])
            if "line_series" in doc else None,
            scatter_points=tuple(tuple(p) for p in doc["scatter_points"])
            if "scatter_points" in doc else None,
            pie_fractions=tuple(doc["pie_fractions"]) if "pie_fractions" in doc else None,
        )
    except (KeyError, TypeError) as exc:
        raise ChartSpecError(f"malformed chart spec document: {exc}") from exc
    validate_spec(spec)
    return spec


def load_spec(path: str | Path) -> ChartSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))


def save_spec(spec: ChartSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_json(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
