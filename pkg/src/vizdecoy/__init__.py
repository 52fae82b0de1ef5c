"""Decoy-overlay privacy protection for charts.

Render a chart (or take one as a PNG), generate a same-shape decoy, tune
the decoy's luminance/chroma/blur and the original's mask pitch with a
distance-dependent perception model, and emit a composite that reads as
the original up close and as the decoy from afar.
"""

from .charts import ChartSpec, GeometrySet, Margins, render_chart, validate_spec
from .decoys import DecoyConstraints, DecoyGeometry, gen_decoy, plan_decoy_colors
from .perception import (
    GapScores,
    PerceivedPair,
    ViewingContext,
    gamma,
    gap_scores,
    ms_ssim,
    simulate_perception,
    vsi,
)
from .raster import LchColor, MaskPattern, RasterImage, read_png, write_png
from .search import AgnosticParams, ProtectedBundle, SearchGrid, optimize

__all__ = [
    "AgnosticParams",
    "ChartSpec",
    "DecoyConstraints",
    "DecoyGeometry",
    "GapScores",
    "GeometrySet",
    "LchColor",
    "Margins",
    "MaskPattern",
    "PerceivedPair",
    "ProtectedBundle",
    "RasterImage",
    "SearchGrid",
    "ViewingContext",
    "gamma",
    "gap_scores",
    "gen_decoy",
    "ms_ssim",
    "optimize",
    "plan_decoy_colors",
    "read_png",
    "render_chart",
    "simulate_perception",
    "validate_spec",
    "vsi",
    "write_png",
]

__version__ = "0.1.0"
