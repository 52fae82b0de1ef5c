"""Rule-based decoy geometry, one generator per chart type.

The decoy always shares the original's mark shape. Bars interleave between
and flank the originals and are taller than their neighbors; lines keep
the original x anchors with jittered, trend-flipped y; scatter dots are
displaced, enlarged copies; pie slices are split/merged with a larger
radius. All randomness comes from a seeded PCG64 generator so identical
inputs reproduce identical decoys on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .charts import BarRect, Dot, GeometrySet, Mark, Segment, Slice, mark_to_json
from .extract import LineDetection
from .raster import Rect, circular_mean_hue, srgb_to_lch

SINGLE_HUE_TOLERANCE_DEG = 5.0


@dataclass(frozen=True)
class DecoyConstraints:
    """Per-type decoy generation knobs; defaults are config-overridable."""

    seed: int = 0
    bar_min_excess: float = 0.10
    bar_count_extra: int = 1  # decoy bars per gap between originals
    line_jitter: float = 0.15  # fraction of plot height
    line_trend_flip_prob: float = 0.5
    scatter_disp_min: float | None = None  # None: 1.5 * dot radius
    scatter_disp_max: float | None = None  # None: 3.0 * dot radius
    scatter_radius_scale: float = 1.6
    scatter_count_extra: int = 0
    pie_split_threshold: float = 120.0
    pie_split_parts: int = 2
    pie_merge_threshold: float = 30.0
    pie_radius_scale: float = 1.15

    def __post_init__(self):
        if self.scatter_radius_scale <= 1 or self.pie_radius_scale <= 1:
            raise ValueError("scale factors must be > 1")
        if not (0.0 <= self.line_trend_flip_prob <= 1.0):
            raise ValueError("flip probability must lie in [0, 1]")
        if self.bar_min_excess < 0 or self.line_jitter < 0:
            raise ValueError("excess and jitter must be non-negative")
        if self.bar_count_extra < 1:
            raise ValueError("need at least one decoy bar per gap")
        if self.pie_split_parts < 2:
            raise ValueError("split must produce at least 2 parts")
        if (
            self.scatter_disp_min is not None
            and self.scatter_disp_max is not None
            and self.scatter_disp_min > self.scatter_disp_max
        ):
            raise ValueError("scatter displacement min exceeds max")


@dataclass(frozen=True)
class DecoyGeometry:
    chart_type: str
    marks: tuple[Mark, ...]
    provenance: tuple[str, ...]

    def __post_init__(self):
        if len(self.marks) != len(self.provenance):
            raise ValueError("one provenance note per mark required")

    def to_json(self) -> dict:
        return {
            "chart_type": self.chart_type,
            "marks": [mark_to_json(m) for m in self.marks],
            "provenance": list(self.provenance),
        }


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Bars


def gen_decoy_bar(orig: GeometrySet, c: DecoyConstraints) -> DecoyGeometry:
    bars = [m for m in orig.data_marks if isinstance(m, BarRect)]
    if not bars:
        raise ValueError("original geometry has no bars")
    bars = sorted(bars, key=lambda b: b.x)
    plot = orig.plot_rect
    baseline = bars[0].y + bars[0].h
    width = float(np.median([b.w for b in bars]))
    centers = [b.x + b.w / 2.0 for b in bars]
    slot = centers[1] - centers[0] if len(centers) > 1 else max(width * 1.5, plot.w / 4.0)

    # center position, reference height, provenance - in deterministic order
    slots: list[tuple[float, float, str]] = []
    slots.append((centers[0] - slot / 2.0, bars[0].h, "flank:left"))
    for i in range(len(bars) - 1):
        h_ref = max(bars[i].h, bars[i + 1].h)
        for j in range(c.bar_count_extra):
            f = (j + 1) / (c.bar_count_extra + 1)
            cx = centers[i] + f * (centers[i + 1] - centers[i])
            slots.append((cx, h_ref, f"interleaved-at:{i}"))
    slots.append((centers[-1] + slot / 2.0, bars[-1].h, "flank:right"))

    rng = _rng(c.seed)
    marks: list[Mark] = []
    notes: list[str] = []
    for cx, h_ref, note in slots:
        lo = (1.0 + c.bar_min_excess) * h_ref
        hi = max(float(plot.h), lo)
        h = lo + (hi - lo) * rng.uniform()
        h = max(h, 1.0)
        x = min(max(cx - width / 2.0, plot.x), plot.x2 - width)
        marks.append(BarRect(x, baseline - h, width, h, bars[0].color))
        notes.append(note)
    return DecoyGeometry("bar", tuple(marks), tuple(notes))


# ---------------------------------------------------------------------------
# Lines


@dataclass(frozen=True)
class _Chain:
    points: tuple[tuple[float, float], ...]
    thickness: float
    color: tuple[int, int, int]


def _chain_segments(segments: Sequence[Segment]) -> list[_Chain]:
    """Group consecutive segments into polylines via shared endpoints."""
    chains: list[_Chain] = []
    for seg in segments:
        start = (seg.x0, seg.y0)
        end = (seg.x1, seg.y1)
        if chains and math.dist(chains[-1].points[-1], start) < 1e-6:
            last = chains[-1]
            chains[-1] = replace(last, points=last.points + (end,))
        else:
            chains.append(_Chain((start, end), seg.thickness, seg.color))
    return chains


def gen_decoy_line(
    orig_lines: Sequence[Segment | LineDetection],
    plot_rect: Rect,
    c: DecoyConstraints,
) -> DecoyGeometry:
    if not orig_lines:
        raise ValueError("no original line segments")
    segments: list[Segment] = []
    for item in orig_lines:
        if isinstance(item, LineDetection):
            x0, y0, x1, y1 = item.endpoints
            segments.append(Segment(x0, y0, x1, y1, 3.0, (0, 0, 0)))
        else:
            segments.append(item)
    chains = _chain_segments(segments)

    rng = _rng(c.seed)
    plot_h = float(plot_rect.h)
    marks: list[Mark] = []
    notes: list[str] = []
    for ci, chain in enumerate(chains):
        xs = [p[0] for p in chain.points]
        ys = [p[1] for p in chain.points]
        # jitter and pull amounts are drawn even when jitter is 0 so the
        # random stream layout does not depend on parameter values
        ys = [y + rng.uniform(-1.0, 1.0) * c.line_jitter * plot_h for y in ys]
        for i in range(len(ys) - 1):
            if rng.uniform() < c.line_trend_flip_prob:
                ys[i + 1] = 2.0 * ys[i] - ys[i + 1]
        pulls = (rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1))
        if c.line_jitter > 0:
            for end, other, pull in ((0, 1, pulls[0]), (-1, -2, pulls[1])):
                dx = xs[other] - xs[end]
                dy = ys[other] - ys[end]
                xs[end] += pull * dx
                ys[end] += pull * dy
        xs = [min(max(x, float(plot_rect.x)), float(plot_rect.x2)) for x in xs]
        ys = [min(max(y, float(plot_rect.y)), float(plot_rect.y2)) for y in ys]
        for i in range(len(xs) - 1):
            marks.append(
                Segment(xs[i], ys[i], xs[i + 1], ys[i + 1], chain.thickness, chain.color)
            )
            notes.append(f"jittered-from:chain{ci}")
    return DecoyGeometry("line", tuple(marks), tuple(notes))


# ---------------------------------------------------------------------------
# Scatter


def gen_decoy_scatter(
    orig_dots: Sequence[Dot],
    plot_rect: Rect,
    c: DecoyConstraints,
) -> DecoyGeometry:
    if not orig_dots:
        raise ValueError("no original dots")
    rng = _rng(c.seed)
    marks: list[Mark] = []
    notes: list[str] = []
    for i, dot in enumerate(orig_dots):
        d_min = 1.5 * dot.r if c.scatter_disp_min is None else c.scatter_disp_min
        d_max = 3.0 * dot.r if c.scatter_disp_max is None else c.scatter_disp_max
        ang = rng.uniform(0.0, 2.0 * math.pi)
        mag = rng.uniform(d_min, d_max)
        cx = dot.cx + mag * math.cos(ang)
        cy = dot.cy + mag * math.sin(ang)
        r = c.scatter_radius_scale * dot.r
        ccx = _clamp(cx, plot_rect.x + r, plot_rect.x2 - r)
        ccy = _clamp(cy, plot_rect.y + r, plot_rect.y2 - r)
        clipped = (ccx, ccy) != (cx, cy)
        marks.append(Dot(ccx, ccy, r, dot.color))
        notes.append(f"displaced-from:{i}" + (":clipped" if clipped else ""))
    r_extra = c.scatter_radius_scale * float(np.median([d.r for d in orig_dots]))
    for _ in range(c.scatter_count_extra):
        cx = rng.uniform(plot_rect.x + r_extra, plot_rect.x2 - r_extra)
        cy = rng.uniform(plot_rect.y + r_extra, plot_rect.y2 - r_extra)
        marks.append(Dot(cx, cy, r_extra, orig_dots[0].color))
        notes.append("extra")
    return DecoyGeometry("scatter", tuple(marks), tuple(notes))


def _clamp(v: float, lo: float, hi: float) -> float:
    if lo > hi:  # mark wider than the plot; center it
        return (lo + hi) / 2.0
    return min(max(v, lo), hi)


# ---------------------------------------------------------------------------
# Pie


def gen_decoy_pie(orig_slices: Sequence[Slice], c: DecoyConstraints) -> DecoyGeometry:
    if not orig_slices:
        raise ValueError("no original slices")
    total = sum(s.sweep_angle for s in orig_slices)
    if abs(total - 360.0) > 1e-6:
        raise ValueError(f"slice sweeps sum to {total}, expected 360")

    # split pass
    split: list[tuple[float, str]] = []
    for i, s in enumerate(orig_slices):
        if s.sweep_angle > c.pie_split_threshold:
            part = s.sweep_angle / c.pie_split_parts
            for j in range(c.pie_split_parts):
                split.append((part, f"split-from:{i}:part:{j}"))
        else:
            split.append((s.sweep_angle, f"kept-from:{i}"))

    # merge pass: maximal runs of adjacent small slices collapse into one
    merged: list[tuple[float, str]] = []
    i = 0
    while i < len(split):
        if split[i][0] < c.pie_merge_threshold:
            j = i
            while j < len(split) and split[j][0] < c.pie_merge_threshold:
                j += 1
            if j - i >= 2:
                merged.append(
                    (sum(s for s, _ in split[i:j]), f"merged-from:{i}-{j - 1}")
                )
            else:
                merged.append(split[i])
            i = j
        else:
            merged.append(split[i])
            i += 1

    first = orig_slices[0]
    radius = c.pie_radius_scale * first.radius
    start = first.start_angle
    marks: list[Mark] = []
    notes: list[str] = []
    for k, (sweep, note) in enumerate(merged):
        color = orig_slices[min(k, len(orig_slices) - 1)].color
        marks.append(Slice(first.cx, first.cy, radius, start % 360.0, sweep, color))
        notes.append(note)
        start += sweep
    return DecoyGeometry("pie", tuple(marks), tuple(notes))


# ---------------------------------------------------------------------------
# Dispatch and hue planning


def gen_decoy(orig: GeometrySet, c: DecoyConstraints) -> DecoyGeometry:
    if orig.chart_type == "bar":
        return gen_decoy_bar(orig, c)
    if orig.chart_type == "line":
        segs = [m for m in orig.data_marks if isinstance(m, Segment)]
        return gen_decoy_line(segs, orig.plot_rect, c)
    if orig.chart_type == "scatter":
        dots = [m for m in orig.data_marks if isinstance(m, Dot)]
        return gen_decoy_scatter(dots, orig.plot_rect, c)
    if orig.chart_type == "pie":
        slices = [m for m in orig.data_marks if isinstance(m, Slice)]
        return gen_decoy_pie(slices, c)
    raise ValueError(f"unknown chart type {orig.chart_type!r}")


def plan_decoy_colors(orig: GeometrySet, decoy: DecoyGeometry) -> list[float]:
    """Target hue (degrees) per decoy mark.

    Single-hue originals (pairwise circular distance < 5 deg) propagate their
    hue to every decoy mark; otherwise each decoy mark takes the circular
    mean of its two nearest original marks' hues.
    """
    data = orig.data_marks
    if not data:
        raise ValueError("original geometry has no data marks")
    hues = [srgb_to_lch(m.color).H for m in data]

    if _single_hue(hues):
        shared, _ = circular_mean_hue(hues)
        return [shared] * len(decoy.marks)

    plan: list[float] = []
    for mark in decoy.marks:
        dists = [_mark_distance(mark, om) for om in data]
        order = sorted(range(len(data)), key=lambda i: (dists[i], i))
        nearest = order[:2] if len(order) >= 2 else order * 2
        mean, _ = circular_mean_hue([hues[nearest[0]], hues[nearest[1]]])
        plan.append(mean)
    return plan


def _single_hue(hues: Sequence[float]) -> bool:
    for i in range(len(hues)):
        for j in range(i + 1, len(hues)):
            d = abs(hues[i] - hues[j]) % 360.0
            if min(d, 360.0 - d) >= SINGLE_HUE_TOLERANCE_DEG:
                return False
    return True


def _mark_distance(a: Mark, b: Mark) -> float:
    if isinstance(a, Slice) and isinstance(b, Slice):
        d = abs(a.mid_angle - b.mid_angle) % 360.0
        return min(d, 360.0 - d)
    return math.dist(a.center, b.center)
