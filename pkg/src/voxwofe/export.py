"""Writers for voxel CSV, legacy VTK structured points, weight tables and SVG charts.

All writers are deterministic: floats use ``repr`` (shortest round-trip
form) and nothing time- or host-dependent is emitted.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .fractal import CVCurve, SegmentedFit
from .grid import VolumeMask
from .validate import PVCurves
from .wofe import BINARY, EvidenceLayer

CLASSED_TABLE_COLUMNS = (
    "lower", "upper", "w_plus", "w_minus", "contrast", "studentized_contrast",
    "fuzzy_contrast", "fuzzy_weight", "fuzzy_variance", "var_w_plus", "var_w_minus",
    "n_em", "n_emb", "n_ebm", "n_ebmb", "corrected", "included",
)
BINARY_TABLE_COLUMNS = (
    "layer", "w_plus", "w_minus", "contrast", "studentized_contrast",
    "var_w_plus", "var_w_minus", "corrected", "included",
)


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return repr(float(value))


def write_rows(path, header: Sequence[str], rows, preamble: Sequence[str] = ()) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([fmt(v) for v in row] for row in rows)
    return path


def write_mask_csv(path, mask: VolumeMask, preamble: Sequence[str] = ()) -> Path:
    """Every voxel as ``i,j,k,flag``."""
    idx = np.indices(mask.grid.shape).reshape(3, -1).T
    flags = mask.flags.ravel().astype(int)
    return write_rows(path, ("i", "j", "k", "flag"),
                      (map(int, (i, j, k, f)) for (i, j, k), f in zip(idx, flags)), preamble)


def write_model_csv(path, mask: VolumeMask, fields: Mapping[str, np.ndarray],
                    preamble: Sequence[str] = ()) -> Path:
    """Active voxels as ``i,j,k,x,y,z`` followed by one column per field."""
    idx = mask.indices()
    x, y, z = mask.grid.centroid(idx[:, 0], idx[:, 1], idx[:, 2])
    cols = [np.asarray(a)[tuple(idx.T)] for a in fields.values()]

    def rows():
        for n, (i, j, k) in enumerate(idx):
            yield (int(i), int(j), int(k), x[n], y[n], z[n], *(c[n] for c in cols))

    return write_rows(path, ("i", "j", "k", "x", "y", "z", *fields.keys()), rows(), preamble)


def write_vtk(path, grid, fields: Mapping[str, np.ndarray], title: str = "voxwofe volume") -> Path:
    """Legacy ASCII VTK structured-points file with one scalar array per field.

    Integer and boolean arrays are written as ``int``; floats as ``double``
    (NaN marks inactive voxels).
    """
    path = Path(path)
    ox, oy, oz = grid.centroid(0, 0, 0)
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx} {grid.ny} {grid.nz}",
        f"ORIGIN {fmt(ox)} {fmt(oy)} {fmt(oz)}",
        f"SPACING {fmt(grid.dx)} {fmt(grid.dy)} {fmt(grid.dz)}",
        f"POINT_DATA {grid.size}",
    ]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        for name, arr in fields.items():
            arr = np.asarray(arr)
            flat = arr.transpose(2, 1, 0).ravel()  # x varies fastest
            if arr.dtype.kind in "biu":
                fh.write(f"SCALARS {name} int 1\nLOOKUP_TABLE default\n")
                body = (str(int(v)) for v in flat)
            else:
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                body = (fmt(v) for v in flat)
            fh.write("\n".join(body) + "\n")
    return path


def read_vtk_header(path) -> dict[str, tuple]:
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            key, *rest = line.split()
            if key in ("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA"):
                out[key] = tuple(float(v) for v in rest)
            if key == "POINT_DATA":
                break
    return out


def binary_table_rows(layers: Sequence[EvidenceLayer]):
    for layer in layers:
        if layer.kind != BINARY:
            continue
        r = layer.weights
        yield (layer.name, r.w_plus, r.w_minus, r.contrast, r.studentized_contrast,
               r.var_w_plus, r.var_w_minus, r.corrected, layer.included)


def classed_table_rows(layer: EvidenceLayer):
    for c in layer.classes:
        r, n = c.weights, c.counts
        yield (c.lower, c.upper, r.w_plus, r.w_minus, r.contrast, r.studentized_contrast,
               c.fuzzy_contrast, c.fuzzy_weight, c.fuzzy_variance, r.var_w_plus, r.var_w_minus,
               n.n_em, n.n_emb, n.n_ebm, n.n_ebmb, r.corrected, c.included)


def write_weight_tables(out_dir, layers: Sequence[EvidenceLayer], preamble: Sequence[str] = ()) -> list[Path]:
    """``weights_binary.csv`` plus one ``weights_<layer>.csv`` per classed layer."""
    out_dir = Path(out_dir)
    paths = [write_rows(out_dir / "weights_binary.csv", BINARY_TABLE_COLUMNS,
                        binary_table_rows(layers), preamble)]
    for layer in layers:
        if layer.kind != BINARY:
            paths.append(write_rows(out_dir / f"weights_{safe_name(layer.name)}.csv",
                                    CLASSED_TABLE_COLUMNS, classed_table_rows(layer), preamble))
    return paths


def safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


# --- SVG charts -------------------------------------------------------------

W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60


def _svg(title: str, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">'
    )
    frame = (
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
        'fill="none" stroke="black"/>'
    )
    text = f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>'
    return "\n".join([head, text, frame, *body, "</svg>"]) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi):
        self.xlo, self.xhi = xlo, xhi if xhi > xlo else xlo + 1
        self.ylo, self.yhi = ylo, yhi if yhi > ylo else ylo + 1

    def px(self, x):
        return LEFT + (x - self.xlo) / (self.xhi - self.xlo) * (W - LEFT - RIGHT)

    def py(self, y):
        return H - BOTTOM - (y - self.ylo) / (self.yhi - self.ylo) * (H - TOP - BOTTOM)

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'

    def ticks(self, xfmt, yfmt, n=5):
        out = []
        for v in np.linspace(self.xlo, self.xhi, n):
            x = self.px(v)
            out.append(f'<line x1="{x:.2f}" y1="{H - BOTTOM}" x2="{x:.2f}" y2="{H - BOTTOM + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{H - BOTTOM + 18}" text-anchor="middle">{_esc(xfmt(v))}</text>')
        for v in np.linspace(self.ylo, self.yhi, n):
            y = self.py(v)
            out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_esc(yfmt(v))}</text>')
        return out

    def labels(self, xlabel, ylabel):
        return [
            f'<text x="{(LEFT + W - RIGHT) / 2:.1f}" y="{H - 18}" text-anchor="middle">{_esc(xlabel)}</text>',
            f'<text x="18" y="{(TOP + H - BOTTOM) / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 18 {(TOP + H - BOTTOM) / 2:.1f})">{_esc(ylabel)}</text>',
        ]


def cv_chart_svg(curve: CVCurve, fit: SegmentedFit | None, title: str, xlabel: str = "value") -> str:
    """Log-log concentration-volume chart with fitted segments and breakpoints."""
    lx, ly = curve.log()
    ax = _Axes(float(lx.min()), float(lx.max()), float(ly.min()), float(ly.max()))
    body = ax.ticks(lambda v: f"{10 ** v:.3g}", lambda v: f"{10 ** v:.3g}")
    body += ax.labels(f"{xlabel} (log scale)", "cumulative volume, voxels (log scale)")
    body += [
        f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="1.8" fill="#555"/>'
        for x, y in zip(lx, ly)
    ]
    if fit is not None:
        bounds = list(fit.starts) + [len(curve)]
        for (a, b), m, c in zip(zip(bounds[:-1], bounds[1:]), fit.slopes, fit.intercepts):
            xs = [lx[a], lx[b - 1]]
            body.append(ax.polyline(xs, [m * x + c for x in xs], "#c0392b", 2.0))
        for bp in fit.breakpoints:
            x = ax.px(math.log10(bp))
            body.append(f'<line x1="{x:.2f}" y1="{TOP}" x2="{x:.2f}" y2="{H - BOTTOM}" '
                        'stroke="#2c7fb8" stroke-dasharray="4 3"/>')
            body.append(f'<text x="{x + 3:.2f}" y="{TOP + 14}" fill="#2c7fb8">{bp:.4g}</text>')
    return _svg(title, body)


def pv_chart_svg(curves: PVCurves, title: str) -> str:
    """Prediction-rate and occupied-volume curves with the intersection marked."""
    ax = _Axes(0.0, 1.0, 0.0, 100.0)
    t = curves.thresholds
    body = ax.ticks(lambda v: f"{v:.2f}", lambda v: f"{v:.0f}")
    body += ax.labels("prospectivity value", "percentage")
    body.append(ax.polyline(t, 100 * curves.prediction, "#c0392b", 2.0))
    body.append(ax.polyline(t, 100 * curves.volume, "#2c7fb8", 2.0))
    body.append(ax.polyline(t, 100 * (1 - curves.volume), "#2c7fb8", 1.0, dash="4 3"))
    xs, ys = ax.px(min(curves.t_star, 1.0)), ax.py(100 * curves.p_star)
    body.append(f'<circle cx="{xs:.2f}" cy="{ys:.2f}" r="4" fill="none" stroke="black"/>')
    body.append(
        f'<text x="{xs + 6:.2f}" y="{ys - 6:.2f}">P={100 * curves.p_star:.1f}% '
        f'V={100 * curves.v_star:.1f}%</text>'
    )
    body.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 16}" text-anchor="end" fill="#c0392b">prediction rate</text>')
    body.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 32}" text-anchor="end" fill="#2c7fb8">occupied volume</text>')
    return _svg(title, body)
