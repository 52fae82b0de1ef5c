"""Command-line pipeline: render | protect | preview | inspect | score | batch.

Every command is reproducible: config plus inputs plus seed determine all
bytes written. Errors exit with documented codes (2 validation, 3
extraction, 4 I/O) and a single machine-parsable stderr line.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema

from . import charts, extract
from .charts import ChartSpec, ChartSpecError, GeometrySet, element_extent
from .config import (
    ConfigError,
    constraints_from_config,
    contexts_from_config,
    load_config,
)
from .decoys import gen_decoy, plan_decoy_colors
from .extract import ExtractionError
from .perception import MANIFEST_VERSION, gamma, gap_scores, perceive, simulate_perception
from .raster import RasterImage, Rect, read_png, write_png
from .search import ProtectedBundle, SearchGrid, default_grid, optimize

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EXTRACTION = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fail(code: int, kind: str, message: str) -> CliError:
    return CliError(code, kind, " ".join(str(message).split()))


def load_report_schema() -> dict:
    with resources.files(__package__).joinpath("report_schema.json").open("r") as fh:
        return json.load(fh)


def _dump_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Pipeline pieces


def _geometry_from_image(img: RasterImage, chart_type: str, cfg: dict) -> GeometrySet:
    """Recover a GeometrySet from a raster chart (image-input mode)."""
    ex = cfg["extraction"]
    if chart_type == "pie":
        raise _fail(EXIT_EXTRACTION, "extraction",
                    "pie charts are spec-input only; raster pie extraction is unsupported")
    plot = Rect(0, 0, img.width, img.height)
    marks: list[charts.Mark] = []
    if chart_type == "bar":
        marks = list(extract.extract_bars(img, _background_of(img)))
    elif chart_type == "line":
        for det in extract.hough_lines(img, ex["line_vote_threshold"],
                                       ex["line_angle_step"], ex["line_rho_step"]):
            x0, y0, x1, y1 = det.endpoints
            color = tuple(int(c) for c in img.pixels[int(y0), int(x0), :3])
            marks.append(charts.Segment(x0, y0, x1, y1, 3.0, color))
    elif chart_type == "scatter":
        r_max = ex["circle_r_max"] or max(ex["circle_r_min"], min(img.width, img.height) // 8)
        for det in extract.hough_circles(img, ex["circle_r_min"], r_max,
                                         ex["circle_score_threshold"]):
            color = tuple(int(c) for c in img.pixels[int(det.cy), int(det.cx), :3])
            marks.append(charts.Dot(det.cx, det.cy, det.r, color))
    else:
        raise _fail(EXIT_VALIDATION, "validation", f"unknown chart type {chart_type!r}")
    if not marks:
        raise _fail(EXIT_EXTRACTION, "extraction",
                    f"no {chart_type} marks recovered from the input image")
    return GeometrySet(chart_type, tuple(marks), plot, element_extent(marks))


def _background_of(img: RasterImage) -> tuple[int, int, int]:
    corner = img.pixels[0, 0, :3]
    return (int(corner[0]), int(corner[1]), int(corner[2]))


def _grid_from_config(cfg: dict, img: RasterImage, geom: GeometrySet,
                      preset_override: str | None) -> SearchGrid:
    g = cfg["grid"]
    preset = preset_override or g["preset"]
    if preset == "explicit" or (preset_override is None and g["l_values"]):
        return SearchGrid(
            tuple(float(x) for x in g["l_values"]),
            tuple(float(x) for x in g["c_values"]),
            tuple(int(x) for x in g["k_values"]),
            tuple(int(x) for x in g["m_values"]),
            g["stage_plan"] or "single-pass",
        )
    return default_grid(min(img.width, img.height), min(geom.element_extent), preset)


def _run_protection(spec_or_image, cfg: dict, chart_type: str | None,
                    grid_preset: str | None) -> tuple[ProtectedBundle, dict, GeometrySet]:
    if isinstance(spec_or_image, ChartSpec):
        img, geom = charts.render_chart(spec_or_image)
    else:
        img = spec_or_image
        if chart_type is None:
            raise _fail(EXIT_VALIDATION, "validation",
                        "image-input mode requires a declared chart type")
        geom = _geometry_from_image(img, chart_type, cfg)

    ctx_close, ctx_far = contexts_from_config(cfg, img.width, img.height)
    _check_perceived_sizes(img, ctx_close, ctx_far)
    constraints = constraints_from_config(cfg)
    decoy = gen_decoy(geom, constraints)
    plan = plan_decoy_colors(geom, decoy)
    grid = _grid_from_config(cfg, img, geom, grid_preset)
    bundle = optimize(
        img, geom, decoy, plan, grid, ctx_close, ctx_far,
        alpha=cfg["weights"]["alpha"], beta=cfg["weights"]["beta"],
        background=tuple(cfg["background"]),
        pattern_phase=cfg["mask"]["phase"],
        pattern_orientation=cfg["mask"]["orientation"],
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "manifest_version": MANIFEST_VERSION,
        "chart_type": geom.chart_type,
        "params": bundle.best.params.to_json(),
        "scores": bundle.best.scores.to_json(),
        "gamma": {"close": bundle.previews["protected"].gamma_close,
                  "far": bundle.previews["protected"].gamma_far},
        "candidates_evaluated": bundle.evaluated,
        "config": cfg,
    }
    return bundle, report, geom


def _check_perceived_sizes(img: RasterImage, ctx_close, ctx_far) -> None:
    from dataclasses import replace

    g_far = gamma(replace(ctx_far, image_width_px=img.width, image_height_px=img.height))
    far_w = max(1, round(g_far * img.width))
    far_h = max(1, round(g_far * img.height))
    if min(far_w, far_h) < 32:
        raise _fail(
            EXIT_VALIDATION, "validation",
            f"far-distance rendition would be {far_w}x{far_h}; the similarity metrics "
            "need at least 32 px per side - use a larger canvas, a shorter far "
            "distance, or a lower display density",
        )


def _save_bundle(bundle: ProtectedBundle, report: dict, out_dir: Path,
                 decoy_geometry=None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_png(bundle.original, out_dir / "original.png")
    write_png(bundle.decoy, out_dir / "decoy.png")
    write_png(bundle.protected, out_dir / "protected.png")
    write_png(bundle.previews["protected"].close, out_dir / "preview_close.png")
    write_png(bundle.previews["protected"].far, out_dir / "preview_far.png")
    jsonschema.validate(report, load_report_schema())
    _dump_json(report, out_dir / "report.json")
    if decoy_geometry is not None:
        _dump_json(decoy_geometry.to_json(), out_dir / "decoy_geometry.json")


# ---------------------------------------------------------------------------
# Commands


def cmd_render(args) -> int:
    try:
        spec = charts.load_spec(args.spec)
    except FileNotFoundError as exc:
        raise _fail(EXIT_IO, "io", exc)
    except (ChartSpecError, json.JSONDecodeError) as exc:
        raise _fail(EXIT_VALIDATION, "validation", exc)
    img, geom = charts.render_chart(spec, antialias=args.antialias)
    write_png(img, args.out)
    if args.emit_geometry:
        _dump_json(charts.geometry_to_json(geom), Path(args.emit_geometry))
    return EXIT_OK


def cmd_protect(args) -> int:
    cfg = _load_cfg(args)
    in_path = Path(args.input)
    if not in_path.exists():
        raise _fail(EXIT_IO, "io", f"input not found: {in_path}")
    mode = cfg["mode"]
    if in_path.suffix.lower() == ".png":
        mode = "image-input"
    chart_type = args.chart_type or cfg["image_chart_type"]
    try:
        if mode == "image-input":
            source = read_png(in_path)
        else:
            source = charts.load_spec(in_path)
    except (ChartSpecError, json.JSONDecodeError) as exc:
        raise _fail(EXIT_VALIDATION, "validation", exc)
    except OSError as exc:
        raise _fail(EXIT_IO, "io", exc)

    constraints_seed = {"seed": args.seed} if args.seed is not None else {}
    if constraints_seed:
        cfg = dict(cfg, **constraints_seed)
    try:
        bundle, report, geom = _run_protection(source, cfg, chart_type, args.grid_preset)
    except ChartSpecError as exc:
        raise _fail(EXIT_VALIDATION, "validation", exc)
    except ExtractionError as exc:
        raise _fail(EXIT_EXTRACTION, "extraction", exc)
    report["input"] = str(in_path)
    out_dir = Path(args.out)
    decoy_geom = None
    if args.emit_decoy:
        decoy_geom = gen_decoy(geom, constraints_from_config(cfg))
    try:
        _save_bundle(bundle, report, out_dir, decoy_geom)
    except OSError as exc:
        raise _fail(EXIT_IO, "io", exc)
    print(json.dumps({"out": str(out_dir), "score": report["scores"]["score"],
                      "gap1": report["scores"]["gap1"], "gap2": report["scores"]["gap2"]}))
    return EXIT_OK


def cmd_preview(args) -> int:
    bundle_dir = Path(args.bundle)
    report_path = bundle_dir / "report.json"
    protected_path = bundle_dir / "protected.png"
    if not report_path.exists() or not protected_path.exists():
        raise _fail(EXIT_IO, "io", f"not a protection bundle: {bundle_dir}")
    with open(report_path, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    viewing = report["config"]["viewing"]
    img = read_png(protected_path)
    from .perception import ViewingContext

    ctx = ViewingContext(
        distance_cm=args.distance,
        image_width_px=img.width,
        image_height_px=img.height,
        theta_h_deg=viewing["theta_h_deg"],
        theta_w_deg=viewing["theta_w_deg"],
        display_density_px_per_cm=viewing["display_density_px_per_cm"],
    )
    out_img = simulate_perception(img, ctx)
    if args.out:
        write_png(out_img, args.out)
    else:
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(out_img.pixels).save(buf, format="PNG")
        sys.stdout.buffer.write(buf.getvalue())
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        img = read_png(args.image)
    except OSError as exc:
        raise _fail(EXIT_IO, "io", exc)
    cfg = _load_cfg(args)
    ex = cfg["extraction"]
    doc: dict
    if args.chart_type == "line":
        dets = extract.hough_lines(img, ex["line_vote_threshold"],
                                   ex["line_angle_step"], ex["line_rho_step"])
        doc = extract.detections_to_json(lines=dets)
    elif args.chart_type == "scatter":
        r_max = ex["circle_r_max"] or max(ex["circle_r_min"], min(img.width, img.height) // 8)
        dets = extract.hough_circles(img, ex["circle_r_min"], r_max,
                                     ex["circle_score_threshold"])
        doc = extract.detections_to_json(dots=dets)
    elif args.chart_type == "bar":
        bars = extract.extract_bars(img, _background_of(img))
        doc = extract.detections_to_json(bars=bars)
    else:
        raise _fail(EXIT_EXTRACTION, "extraction",
                    f"inspect supports line, scatter, bar; got {args.chart_type!r}")
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        orig = read_png(args.original)
        decoy = read_png(args.decoy)
        protected = read_png(args.protected)
    except OSError as exc:
        raise _fail(EXIT_IO, "io", exc)
    dims = {(im.width, im.height) for im in (orig, decoy, protected)}
    if len(dims) != 1:
        raise _fail(EXIT_VALIDATION, "validation", f"images differ in size: {sorted(dims)}")
    cfg = _load_cfg(args)
    ctx_close, ctx_far = contexts_from_config(cfg, orig.width, orig.height)
    _check_perceived_sizes(orig, ctx_close, ctx_far)
    pairs = {name: perceive(im, ctx_close, ctx_far)
             for name, im in (("original", orig), ("decoy", decoy), ("protected", protected))}
    scores = gap_scores(pairs["original"], pairs["decoy"], pairs["protected"],
                        alpha=cfg["weights"]["alpha"], beta=cfg["weights"]["beta"])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "manifest_version": MANIFEST_VERSION,
        "scores": scores.to_json(),
        "gamma": {"close": pairs["original"].gamma_close,
                  "far": pairs["original"].gamma_far},
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_batch(args) -> int:
    spec_dir = Path(args.spec_dir)
    if not spec_dir.is_dir():
        raise _fail(EXIT_IO, "io", f"not a directory: {spec_dir}")
    cfg = _load_cfg(args)
    if args.seed is not None:
        cfg = dict(cfg, seed=args.seed)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    errors = []
    timings = {}
    for spec_path in sorted(spec_dir.glob("*.json")):
        t0 = time.perf_counter()
        try:
            spec = charts.load_spec(spec_path)
            bundle, report, _geom = _run_protection(spec, cfg, None, args.grid_preset)
            report["input"] = str(spec_path)
            _save_bundle(bundle, report, out_root / spec_path.stem)
            rows.append({
                "spec": str(spec_path),
                "chart_type": spec.chart_type,
                "gap1": report["scores"]["gap1"],
                "gap2": report["scores"]["gap2"],
                "score": report["scores"]["score"],
                "params": report["params"],
            })
        except (ChartSpecError, ConfigError, ExtractionError, CliError,
                json.JSONDecodeError, ValueError) as exc:
            errors.append({"spec": str(spec_path), "error": " ".join(str(exc).split())})
        timings[str(spec_path)] = round(time.perf_counter() - t0, 3)

    by_type: dict[str, list[dict]] = {}
    for row in rows:
        by_type.setdefault(row["chart_type"], []).append(row)
    summary_rows = [
        {
            "chart_type": ct,
            "runs": len(items),
            "mean_gap1": sum(r["gap1"] for r in items) / len(items),
            "mean_gap2": sum(r["gap2"] for r in items) / len(items),
            "mean_score": sum(r["score"] for r in items) / len(items),
        }
        for ct, items in sorted(by_type.items())
    ]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "rows": rows,
        "per_type": summary_rows,
        "errors": errors,
        "timings_seconds": timings,  # wall-clock; excluded from determinism checks
    }
    _dump_json(summary, out_root / "summary.json")
    print(json.dumps({"specs": len(rows), "errors": len(errors),
                      "out": str(out_root)}))
    return EXIT_OK if not errors else EXIT_VALIDATION


def _load_cfg(args) -> dict:
    overrides: dict = {}
    if getattr(args, "grid_preset", None):
        overrides.setdefault("grid", {})["preset"] = args.grid_preset
    try:
        return load_config(getattr(args, "config", None), overrides)
    except ConfigError as exc:
        raise _fail(EXIT_VALIDATION, "validation", exc)
    except OSError as exc:
        raise _fail(EXIT_IO, "io", exc)


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vizdecoy",
        description="Overlay a tuned decoy chart so the original reads up close "
                    "while distant observers see only the decoy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a chart spec to PNG")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--antialias", action="store_true")
    p.add_argument("--emit-geometry", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("protect", help="build a privacy-preserving composite")
    p.add_argument("--input", required=True, help="chart spec JSON or chart PNG")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chart-type", choices=["bar", "line", "scatter", "pie"], default=None)
    p.add_argument("--grid-preset", choices=["coarse", "fine", "paper-literal-subset"],
                   default=None)
    p.add_argument("--emit-decoy", action="store_true")
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("preview", help="simulate a bundle's protected image at a distance")
    p.add_argument("--bundle", required=True)
    p.add_argument("--distance", type=float, required=True, help="viewing distance in cm")
    p.add_argument("--out", default=None, help="output PNG (stdout when omitted)")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("inspect", help="extract mark geometry from a chart PNG")
    p.add_argument("--image", required=True)
    p.add_argument("--chart-type", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("score", help="score an (original, decoy, protected) triple")
    p.add_argument("--original", required=True)
    p.add_argument("--decoy", required=True)
    p.add_argument("--protected", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("batch", help="protect every spec in a directory")
    p.add_argument("--spec-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid-preset", choices=["coarse", "fine", "paper-literal-subset"],
                   default=None)
    p.set_defaults(func=cmd_batch)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ERROR code={exc.code} kind={exc.kind}: {exc}", file=sys.stderr)
        return exc.code
    except ChartSpecError as exc:
        print(f"ERROR code={EXIT_VALIDATION} kind=validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ExtractionError as exc:
        print(f"ERROR code={EXIT_EXTRACTION} kind=extraction: {exc}", file=sys.stderr)
        return EXIT_EXTRACTION
    except OSError as exc:
        print(f"ERROR code={EXIT_IO} kind=io: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ERROR code={EXIT_VALIDATION} kind=validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
