#!/usr/bin/env python3
"""Generate a seeded corpus of demo chart specs (one JSON per chart).

Usage: python scripts/make_demo_specs.py OUT_DIR [--per-type N] [--seed S]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vizdecoy.charts import ChartSpec, save_spec  # noqa: E402

CANVAS = (480, 360)


def random_spec(chart_type: str, rng: np.random.Generator) -> ChartSpec:
    w, h = CANVAS
    if chart_type == "bar":
        n = int(rng.integers(4, 8))
        heights = tuple(float(v) for v in rng.uniform(15, 100, size=n).round(1))
        return ChartSpec("bar", w, h, bar_heights=heights)
    if chart_type == "line":
        n = int(rng.integers(4, 8))
        ys = tuple(float(v) for v in rng.uniform(10, 100, size=n).round(1))
        series = tuple((float(i), y) for i, y in enumerate(ys))
        return ChartSpec("line", w, h, line_series=(series,))
    if chart_type == "scatter":
        n = int(rng.integers(5, 9))
        pts = []
        while len(pts) < n:
            x, y = rng.uniform(5, 95), rng.uniform(5, 95)
            r = float(rng.integers(4, 10))
            if all((x - px) ** 2 + (y - py) ** 2 > 20**2 for px, py, _ in pts):
                pts.append((round(x, 1), round(y, 1), r))
        return ChartSpec("scatter", w, h, scatter_points=tuple(pts))
    n = int(rng.integers(3, 6))
    fractions = rng.dirichlet(np.ones(n) * 2.0)
    fractions = np.maximum(fractions, 0.05)
    fractions = fractions / fractions.sum()
    return ChartSpec("pie", w, h, pie_fractions=tuple(float(f) for f in fractions.round(4)))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--per-type", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    for chart_type in ("bar", "line", "scatter", "pie"):
        for i in range(args.per_type):
            spec = random_spec(chart_type, rng)
            save_spec(spec, out / f"{chart_type}_{i:02d}.json")
    print(f"wrote {4 * args.per_type} specs to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
