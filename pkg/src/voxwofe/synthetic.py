"""Synthetic borehole fixture with a planted porphyry-style ore body.

A vertical pipe of high Cu grade sits inside andesite and coincides with a
quartzolite plug. Fe forms a tight halo around the pipe, Mo a broad weak
one, and Zn carries no signal. Alteration and rock-type zones are laid out
independently of the pipe, and one fault cuts the far corner of the block.
The drilling pattern has 113 holes. This is a test utility: every draw
comes from a seeded generator so the files are reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXTENT = 400.0
GROUND = 1000.0
HOLE_DEPTH = 380.0
INTERVAL = 10.0


@dataclass(frozen=True)
class OreBody:
    """Vertical cylinder of mineralization."""

    x: float = 225.0
    y: float = 185.0
    radius: float = 55.0
    z_top: float = 900.0
    z_bottom: float = 700.0

    def distance(self, x, y):
        return np.hypot(np.asarray(x) - self.x, np.asarray(y) - self.y)

    def vertical_factor(self, z):
        z = np.asarray(z, dtype=float)
        below = np.clip(self.z_bottom - z, 0, None)
        above = np.clip(z - self.z_top, 0, None)
        return np.exp(-((below + above) / 40.0) ** 2)

    def contains(self, x, y, z):
        z = np.asarray(z)
        return (self.distance(x, y) <= self.radius) & (z >= self.z_bottom) & (z <= self.z_top)


BODY = OreBody()


def ground_elevation(x, y):
    return GROUND + 0.02 * np.asarray(x, dtype=float) - 0.01 * np.asarray(y, dtype=float)


def lithology(x, y, z):
    r = BODY.distance(x, y)
    core = (r <= BODY.radius) & (np.asarray(z) >= BODY.z_bottom) & (np.asarray(z) <= BODY.z_top)
    granodiorite = np.asarray(x) < 90.0
    return np.where(core, "quartzolite", np.where(granodiorite, "granodiorite", "andesite"))


def alteration(x, y, z):
    x, y, z = (np.asarray(v) for v in (x, y, z))
    return np.where(
        (x < 150.0) & (y > 250.0), "potassic",
        np.where((x > 330.0) & (y < 130.0), "silicified",
                 np.where(z > 930.0, "argillic", "propylitic")),
    )


def rock_type(x, y, z):
    return np.where(np.asarray(y) + 0.3 * np.asarray(x) < 200.0, "source_a", "source_b")


def cu_grade(x, y, z, rng):
    inside = BODY.contains(x, y, z)
    halo = np.exp(-(BODY.distance(x, y) / 90.0) ** 2) * BODY.vertical_factor(z)
    base = 0.08 + 0.12 * halo + rng.lognormal(0.0, 0.35, np.shape(inside)) * 0.04
    return np.where(inside, 0.75 + rng.normal(0.0, 0.12, np.shape(inside)).clip(-0.3, 0.5), base)


def fe_grade(x, y, z, rng):
    halo = np.exp(-(BODY.distance(x, y) / 80.0) ** 2) * BODY.vertical_factor(z)
    return 38000.0 + 45000.0 * halo + rng.normal(0.0, 3000.0, np.shape(halo))


def mo_grade(x, y, z, rng):
    halo = np.exp(-(BODY.distance(x, y) / 200.0) ** 2)
    return 110.0 + 60.0 * halo + rng.lognormal(0.0, 0.5, np.shape(halo)) * 30.0


def zn_grade(x, y, z, rng):
    return rng.lognormal(np.log(150.0), 0.6, np.shape(np.asarray(x)))


FAULTS = (
    # fault_id, vertices, dip, dip_direction
    ("F1", ((20.0, 320.0), (90.0, 390.0)), 70.0, 315.0),
)


def collar_positions(rng, n_side: int = 10):
    step = EXTENT / n_side
    centers = (np.arange(n_side) + 0.5) * step
    xs, ys = np.meshgrid(centers, centers, indexing="ij")
    jitter = rng.uniform(-0.3 * step, 0.3 * step, size=(2, n_side, n_side))
    xy = np.column_stack([(xs + jitter[0]).ravel(), (ys + jitter[1]).ravel()])
    corners = np.array([[5.0, 5.0], [395.0, 5.0], [395.0, 395.0], [5.0, 395.0]])
    # a few extra holes into the pipe, as a drilling campaign would add
    infill = np.array([[BODY.x + dx, BODY.y + dy] for dx in (-30, 0, 30) for dy in (-30, 0, 30)])
    return np.round(np.vstack([corners, xy, infill]), 2)


def _runs(codes):
    """Collapse a per-interval code sequence into ``(start_index, end_index, code)`` runs."""
    runs, start = [], 0
    for n in range(1, len(codes) + 1):
        if n == len(codes) or codes[n] != codes[start]:
            runs.append((start, n, codes[start]))
            start = n
    return runs


def generate(out_dir, seed: int = 7) -> Path:
    """Write the fixture CSVs and a ready-to-run ``pipeline.cfg`` into ``out_dir``."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    xy = collar_positions(rng)
    ids = [f"BH{n + 1:03d}" for n in range(len(xy))]
    zc = np.round(ground_elevation(xy[:, 0], xy[:, 1]), 2)
    depths = np.arange(0.0, HOLE_DEPTH, INTERVAL)
    mid = depths + INTERVAL / 2

    collar_rows, cat_rows, assay_rows = [], [], []
    for hole, (x, y), z in zip(ids, xy, zc):
        collar_rows.append((hole, x, y, z, HOLE_DEPTH))
        zs = z - mid
        for attr, fn in (("lithology", lithology), ("alteration", alteration), ("rocktype", rock_type)):
            codes = list(fn(np.full_like(zs, x), np.full_like(zs, y), zs))
            for a, b, code in _runs(codes):
                cat_rows.append((hole, depths[a], depths[b - 1] + INTERVAL, attr, code))
        for element, fn, unit, digits in (("Cu", cu_grade, "%", 4), ("Fe", fe_grade, "ppm", 2),
                                          ("Mo", mo_grade, "ppm", 3), ("Zn", zn_grade, "ppm", 3)):
            vals = np.clip(fn(np.full_like(zs, x), np.full_like(zs, y), zs, rng), 0.0, None)
            for top, v in zip(depths, vals):
                assay_rows.append((hole, top, top + INTERVAL, element, round(float(v), digits), unit))

    def write(name, header, rows):
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    write("collars.csv", ("hole_id", "x", "y", "z", "total_depth"), collar_rows)
    write("intervals.csv", ("hole_id", "from", "to", "attribute", "code"), cat_rows)
    write("assays.csv", ("hole_id", "from", "to", "element", "value", "unit"), assay_rows)
    write("faults.csv", ("fault_id", "vertex_order", "x", "y", "dip", "dip_direction"),
          [(fid, n, x, y, dip, ddir) for fid, verts, dip, ddir in FAULTS
           for n, (x, y) in enumerate(verts)])

    # surface geology on a 10 m raster of cell centres
    cells = np.arange(5.0, EXTENT, 10.0)
    mx, my = np.meshgrid(cells, cells, indexing="ij")
    mx, my = mx.ravel(), my.ravel()
    surface = ground_elevation(mx, my)
    map_rows = [(x, y, "lithology", c) for x, y, c in zip(mx, my, lithology(mx, my, surface))]
    map_rows += [(x, y, "alteration", c) for x, y, c in zip(mx, my, alteration(mx, my, surface))]
    write("map.csv", ("x", "y", "attribute", "code"), map_rows)

    # one interpreted lithology section through the pipe, west-east
    sx = np.arange(5.0, EXTENT, 20.0)
    sz = np.arange(640.0, 990.0, 20.0)
    gx, gz = np.meshgrid(sx, sz, indexing="ij")
    gx, gz = gx.ravel(), gz.ravel()
    gy = np.full_like(gx, BODY.y)
    keep = gz < ground_elevation(gx, gy) - 5.0
    write("sections.csv", ("x", "y", "z", "attribute", "code"),
          [(x, y, z, "lithology", c) for x, y, z, c in
           zip(gx[keep], gy[keep], gz[keep], lithology(gx[keep], gy[keep], gz[keep]))])

    (out / "pipeline.cfg").write_text(FIXTURE_CONFIG, encoding="utf-8")
    return out / "pipeline.cfg"


FIXTURE_CONFIG = """\
[data]
collars = collars.csv
intervals = intervals.csv
assays = assays.csv
faults = faults.csv
map = map.csv
sections = sections.csv

[grid]
dx = 10
dy = 10
dz = 10

[training]
element = Cu
cutoff = 0.4

[evidence]
attributes = lithology, alteration, rocktype
elements = Fe, Mo, Zn
classes = 10
buffer_radii = 25, 50

[interpolation]
power = 2
sectors = 4
anisotropy = 1
step = 10

[threshold]
segments = 4

[validation]
thresholds = 200

[output]
dir = out
"""
