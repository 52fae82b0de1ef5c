import numpy as np
import pytest

from vizdecoy.charts import ChartSpec, render_chart
from vizdecoy.perception import ViewingContext

# Desk-scale viewing setup for the fixture corpus: a 96-dpi display keeps
# the far-distance rendition above the metrics' minimum sizes on a
# 480x360 canvas (the phone-density default would shrink it to a few px).
FIXTURE_DENSITY = 37.8
CANVAS = (480, 360)


def fixture_specs() -> dict[str, ChartSpec]:
    w, h = CANVAS
    return {
        "bar": ChartSpec("bar", w, h, bar_heights=(30, 60, 90, 45, 70)),
        "line": ChartSpec(
            "line", w, h, line_series=(((0, 10), (1, 35), (2, 20), (3, 42), (4, 28)),)
        ),
        "scatter": ChartSpec(
            "scatter", w, h,
            scatter_points=((10, 30, 6), (40, 55, 8), (70, 20, 5),
                            (25, 70, 9), (90, 40, 7), (55, 85, 6)),
        ),
        "pie": ChartSpec("pie", w, h, pie_fractions=(0.45, 0.25, 0.2, 0.1)),
    }


def random_corpus_spec(chart_type: str, rng: np.random.Generator,
                       canvas: tuple[int, int] = CANVAS) -> ChartSpec:
    """One randomized spec; scatter keeps separation > 3 * max radius."""
    w, h = canvas
    if chart_type == "bar":
        n = int(rng.integers(4, 8))
        return ChartSpec("bar", w, h, bar_heights=tuple(
            float(v) for v in rng.uniform(15, 100, size=n).round(1)))
    if chart_type == "line":
        n = int(rng.integers(4, 8))
        ys = rng.uniform(15, 100, size=n).round(1)
        return ChartSpec("line", w, h, line_series=(
            tuple((float(i), float(y)) for i, y in enumerate(ys)),))
    if chart_type == "scatter":
        n = int(rng.integers(5, 9))
        pts: list[tuple[float, float, float]] = []
        plot_w, plot_h = w - 60, h - 50
        while len(pts) < n:
            x, y = rng.uniform(8, 92), rng.uniform(8, 92)
            r = int(rng.integers(4, 13))
            px, py = x / 100 * plot_w, y / 100 * plot_h
            sep_ok = all(
                np.hypot(px - qx / 100 * plot_w, py - qy / 100 * plot_h)
                > 3 * max(r, qr) + 2
                for qx, qy, qr in pts
            )
            if sep_ok:
                pts.append((round(x, 1), round(y, 1), float(r)))
        return ChartSpec("scatter", w, h, scatter_points=tuple(pts))
    n = int(rng.integers(3, 6))
    fr = rng.dirichlet(np.ones(n) * 2.0)
    fr = np.maximum(fr, 0.05)
    fr = fr / fr.sum()
    return ChartSpec("pie", w, h, pie_fractions=tuple(float(f) for f in fr.round(4)))


@pytest.fixture(scope="session")
def specs():
    return fixture_specs()


@pytest.fixture(scope="session")
def rendered(specs):
    return {name: render_chart(spec) for name, spec in specs.items()}


@pytest.fixture(scope="session")
def fixture_contexts():
    w, h = CANVAS
    close = ViewingContext(30.0, w, h, display_density_px_per_cm=FIXTURE_DENSITY)
    far = ViewingContext(90.0, w, h, display_density_px_per_cm=FIXTURE_DENSITY)
    return close, far
