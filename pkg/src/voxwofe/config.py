"""Pipeline configuration: an INI-style key/value file with section headers.

Paths are resolved relative to the config file. Omitting ``origin_*`` and
``n*`` in ``[grid]`` sizes the grid to the collars and hole depths.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

DATA_KEYS = ("collars", "intervals", "assays", "faults", "map", "sections")
REQUIRED_DATA = ("collars", "assays")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.replace(";", ",").split(",") if v.strip())


@dataclass
class PipelineConfig:
    paths: dict[str, Path]
    spacing: tuple[float, float, float] = (10.0, 10.0, 10.0)
    origin: tuple[float, float, float] | None = None
    counts: tuple[int, int, int] | None = None
    surface_method: str = "nearest"
    training_element: str = "Cu"
    cutoff: float = 0.4
    prior: float | None = None
    attributes: tuple[str, ...] | None = None
    elements: tuple[str, ...] = ("Fe", "Mo", "Zn")
    classes: int = 10
    fuzzy_slope: float | None = None
    fuzzy_center: float | None = None
    min_studentized: float | None = None
    buffer_radii: tuple[float, ...] = (25.0, 50.0)
    power: float = 2.0
    sectors: int = 4
    anisotropy: float = 1.0
    step: float = 10.0
    segments: int = 4
    pv_thresholds: int = 200
    output_dir: Path = field(default_factory=lambda: Path("out"))
    source: Path | None = None

    def check_paths(self):
        for key, path in self.paths.items():
            if not path.is_file():
                raise ConfigurationError(f"{key} file not found: {path}")
        for key in REQUIRED_DATA:
            if key not in self.paths:
                raise ConfigurationError(f"[data] {key} is required")
        if self.cutoff <= 0:
            raise ConfigurationError(f"training cutoff must be > 0, got {self.cutoff}")


def load_config(path, output_dir=None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read(path, encoding="utf-8")
    base = path.resolve().parent

    def get(section, key, conv=str, default=None):
        if parser.has_option(section, key):
            raw = parser.get(section, key).strip()
            if raw == "":
                return default
            try:
                return conv(raw)
            except ValueError as exc:
                raise ConfigurationError(f"[{section}] {key} = {raw!r}: {exc}") from None
        return default

    paths = {}
    for key in DATA_KEYS:
        value = get("data", key)
        if value:
            p = Path(value)
            paths[key] = p if p.is_absolute() else base / p
    unknown = set(parser.options("data")) - set(DATA_KEYS) if parser.has_section("data") else set()
    if unknown:
        raise ConfigurationError(f"unknown [data] keys: {', '.join(sorted(unknown))}")

    cfg = PipelineConfig(paths=paths, source=path)
    cfg.spacing = tuple(get("grid", k, float, 10.0) for k in ("dx", "dy", "dz"))
    origin = [get("grid", k, float) for k in ("origin_x", "origin_y", "origin_z")]
    counts = [get("grid", k, int) for k in ("nx", "ny", "nz")]
    if any(v is not None for v in origin + counts):
        if any(v is None for v in origin + counts):
            raise ConfigurationError("[grid] needs all of origin_x/y/z and nx/ny/nz, or none")
        cfg.origin, cfg.counts = tuple(origin), tuple(counts)
    cfg.surface_method = get("grid", "surface_method", str, cfg.surface_method)
    cfg.training_element = get("training", "element", str, cfg.training_element)
    cfg.cutoff = get("training", "cutoff", float, cfg.cutoff)
    cfg.prior = get("training", "prior", float, None)
    cfg.attributes = get("evidence", "attributes", _names, None)
    cfg.elements = get("evidence", "elements", _names, cfg.elements)
    cfg.classes = get("evidence", "classes", int, cfg.classes)
    cfg.fuzzy_slope = get("evidence", "fuzzy_slope", float, None)
    cfg.fuzzy_center = get("evidence", "fuzzy_center", float, None)
    cfg.min_studentized = get("evidence", "min_studentized", float, None)
    cfg.buffer_radii = get("evidence", "buffer_radii", _floats, cfg.buffer_radii)
    cfg.power = get("interpolation", "power", float, cfg.power)
    cfg.sectors = get("interpolation", "sectors", int, cfg.sectors)
    cfg.anisotropy = get("interpolation", "anisotropy", float, cfg.anisotropy)
    cfg.step = get("interpolation", "step", float, cfg.step)
    cfg.segments = get("threshold", "segments", int, cfg.segments)
    cfg.pv_thresholds = get("validation", "thresholds", int, cfg.pv_thresholds)
    out = output_dir if output_dir is not None else get("output", "dir", str, "out")
    out = Path(out)
    cfg.output_dir = out if out.is_absolute() or output_dir is not None else base / out
    return cfg
