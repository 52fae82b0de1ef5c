"""Run configuration: one JSON document with every default mirrored.

A config file may set any subset of the keys; unset keys keep their
defaults, and CLI flags override file values one to one. The fully
resolved ("effective") config is dumped into every report so a run can be
reproduced from its output alone.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .decoys import DecoyConstraints
from .perception import ViewingContext

ENV_CONFIG_PATH = "VIZDECOY_CONFIG"

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "mode": "spec-input",  # or "image-input"
    "image_chart_type": None,  # required in image-input mode
    "viewing": {
        "close_cm": 30.0,
        "far_cm": 90.0,
        "theta_h_deg": 40.0,
        "theta_w_deg": 50.0,
        "display_density_px_per_cm": 155.55,
    },
    "constraints": {
        "bar_min_excess": 0.10,
        "bar_count_extra": 1,
        "line_jitter": 0.15,
        "line_trend_flip_prob": 0.5,
        "scatter_disp_min": None,
        "scatter_disp_max": None,
        "scatter_radius_scale": 1.6,
        "scatter_count_extra": 0,
        "pie_split_threshold": 120.0,
        "pie_split_parts": 2,
        "pie_merge_threshold": 30.0,
        "pie_radius_scale": 1.15,
    },
    "grid": {
        "preset": "coarse",  # coarse | fine | paper-literal-subset | explicit
        "l_values": None,
        "c_values": None,
        "k_values": None,
        "m_values": None,
        "stage_plan": None,
    },
    "weights": {"alpha": 0.5, "beta": 0.5},
    "mask": {"phase": "keep-first", "orientation": "checkerboard"},
    "background": [255, 255, 255],
    "extraction": {
        "line_vote_threshold": 40,
        "line_angle_step": 1.0,
        "line_rho_step": 1.0,
        "circle_r_min": 3,
        "circle_r_max": 0,  # 0: min(image dims) // 8
        "circle_score_threshold": 0.5,
    },
}


class ConfigError(ValueError):
    """A config document is malformed or inconsistent."""


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, path + key + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Resolve the effective config: defaults <- file <- explicit overrides.

    With no path, the file named by $VIZDECOY_CONFIG is used when set.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        env = os.environ.get(ENV_CONFIG_PATH)
        path = env if env else None
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    v = cfg["viewing"]
    if not (0 < v["close_cm"] < v["far_cm"]):
        raise ConfigError("need 0 < close distance < far distance")
    if cfg["mode"] not in ("spec-input", "image-input"):
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    if cfg["weights"]["alpha"] < 0 or cfg["weights"]["beta"] < 0:
        raise ConfigError("weights must be non-negative")
    if cfg["grid"]["preset"] not in ("coarse", "fine", "paper-literal-subset", "explicit"):
        raise ConfigError(f"unknown grid preset {cfg['grid']['preset']!r}")
    if cfg["grid"]["preset"] == "explicit":
        for key in ("l_values", "c_values", "k_values", "m_values"):
            if not cfg["grid"][key]:
                raise ConfigError(f"explicit grid requires grid.{key}")
    bg = cfg["background"]
    if len(bg) != 3 or any(not (0 <= int(ch) <= 255) for ch in bg):
        raise ConfigError("background must be an [r, g, b] triple in [0, 255]")


def constraints_from_config(cfg: dict, seed: int | None = None) -> DecoyConstraints:
    fields = dict(cfg["constraints"])
    fields["seed"] = cfg["seed"] if seed is None else seed
    return DecoyConstraints(**fields)


def contexts_from_config(cfg: dict, width: int, height: int) -> tuple[ViewingContext, ViewingContext]:
    v = cfg["viewing"]
    common = dict(
        image_width_px=width,
        image_height_px=height,
        theta_h_deg=v["theta_h_deg"],
        theta_w_deg=v["theta_w_deg"],
        display_density_px_per_cm=v["display_density_px_per_cm"],
    )
    return (
        ViewingContext(distance_cm=v["close_cm"], **common),
        ViewingContext(distance_cm=v["far_cm"], **common),
    )
