"""Fault ribbons: down-dip extrusion of surface traces, voxelization and buffers."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DegenerateInputError
from .grid import VolumeMask

FAULT_FIELDS = ("fault_id", "vertex_order", "x", "y", "dip", "dip_direction")


@dataclass(frozen=True)
class FaultTrace:
    """Surface polyline of a fault with constant dip.

    ``dip_direction`` is an azimuth in degrees clockwise from north (+y).
    """

    fault_id: str
    points: tuple[tuple[float, float], ...]
    dip: float
    dip_direction: float
    depth: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        if len(self.points) < 2:
            raise DegenerateInputError(f"fault {self.fault_id!r} needs at least 2 vertices")
        if not 0.0 < self.dip <= 90.0:
            raise DegenerateInputError(f"fault {self.fault_id!r}: dip must be in (0, 90], got {self.dip}")
        if not 0.0 <= self.dip_direction < 360.0:
            raise DegenerateInputError(
                f"fault {self.fault_id!r}: dip_direction must be in [0, 360), got {self.dip_direction}"
            )

    def with_depth(self, depth: float) -> "FaultTrace":
        return FaultTrace(self.fault_id, self.points, self.dip, self.dip_direction, depth)


@dataclass(frozen=True, eq=False)
class RibbonMesh:
    """Quadrilateral facets, array of shape ``(n_facets, 4, 3)``.

    Corner order per facet: upper start, upper end, lower end, lower start.
    """

    facets: np.ndarray = field(repr=False)

    def __post_init__(self):
        f = np.asarray(self.facets, dtype=float).reshape(-1, 4, 3)
        object.__setattr__(self, "facets", f)

    def __len__(self) -> int:
        return len(self.facets)

    def planarity(self) -> np.ndarray:
        """Distance of each facet's 4th corner from the plane of the first three."""
        a, b, c, d = (self.facets[:, n] for n in range(4))
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal, axis=1)
        return np.abs(np.einsum("ij,ij->i", d - a, normal)) / np.where(norm > 0, norm, 1.0)

    def triangles(self) -> np.ndarray:
        f = self.facets
        return np.concatenate([f[:, [0, 1, 2]], f[:, [0, 2, 3]]], axis=0)


def read_fault_traces(path) -> list[FaultTrace]:
    """Fault traces from ``fault_id,vertex_order,x,y,dip,dip_direction`` CSV."""
    groups: dict[str, list[tuple[int, float, float, float, float]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FAULT_FIELDS if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigurationError(f"{path}: missing column(s) {', '.join(missing)}")
        for n, row in enumerate(reader, start=1):
            try:
                groups[row["fault_id"].strip()].append(
                    (int(row["vertex_order"]), float(row["x"]), float(row["y"]),
                     float(row["dip"]), float(row["dip_direction"]))
                )
            except ValueError as exc:
                raise ConfigurationError(f"{path} row {n}: {exc}") from None
    traces = []
    for fid in sorted(groups):
        rows = sorted(groups[fid])
        dips = {(r[3], r[4]) for r in rows}
        if len(dips) != 1:
            raise ConfigurationError(f"{path}: fault {fid!r} has inconsistent dip/dip_direction")
        dip, ddir = dips.pop()
        traces.append(FaultTrace(fid, tuple((r[1], r[2]) for r in rows), dip, ddir))
    return traces


def extrude_ribbon(trace: FaultTrace, surface_z, depth: float | None = None) -> RibbonMesh:
    """Extrude a trace down-dip into one quad per polyline segment.

    The lower edge sits ``depth`` metres below the trace and is shifted
    ``depth / tan(dip)`` horizontally toward ``dip_direction``.
    """
    depth = trace.depth if depth is None else depth
    if trace.dip <= 0:
        raise DegenerateInputError("dip of 0 gives no extrusion")
    z = np.broadcast_to(np.asarray(surface_z, dtype=float), (len(trace.points),))
    top = np.column_stack([np.asarray(trace.points), z])
    if trace.dip == 90.0:
        h = 0.0
    else:
        rad = math.radians(trace.dip)
        h = depth * math.cos(rad) / math.sin(rad)
    az = math.radians(trace.dip_direction)
    shift = np.array([h * math.sin(az), h * math.cos(az), -depth])
    bottom = top + shift
    facets = np.stack([top[:-1], top[1:], bottom[1:], bottom[:-1]], axis=1)
    return RibbonMesh(facets)


def _segment_distance2(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        t = np.zeros(len(p))
    else:
        t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    diff = p - (a + t[:, None] * ab)
    return np.einsum("ij,ij->i", diff, diff)


def point_triangle_distance(p: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Euclidean distance from points ``p`` (n, 3) to a filled triangle (3, 3)."""
    a, b, c = tri
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    edges = np.minimum.reduce([
        _segment_distance2(p, a, b), _segment_distance2(p, b, c), _segment_distance2(p, c, a)
    ])
    normal = np.cross(b - a, c - a)
    nn = float(normal @ normal)
    if nn == 0.0:
        return np.sqrt(edges)
    # barycentric test of the projection onto the plane
    ap = p - a
    s = np.cross(b - a, ap) @ normal
    t = np.cross(c - b, p - b) @ normal
    u = np.cross(a - c, p - c) @ normal
    inside = (s >= 0) & (t >= 0) & (u >= 0)
    plane2 = (ap @ normal) ** 2 / nn
    return np.sqrt(np.where(inside, plane2, edges))


def voxelize_mesh(mesh: RibbonMesh, mask: VolumeMask, tol: float = 1e-9) -> VolumeMask:
    """Active voxels whose centroid is within half a voxel diagonal of the mesh."""
    grid = mask.grid
    idx = mask.indices()
    if len(mesh) == 0:
        raise DegenerateInputError("empty mesh")
    if len(idx) == 0:
        return VolumeMask.empty(grid)
    cen = np.column_stack(grid.centroid(idx[:, 0], idx[:, 1], idx[:, 2]))
    reach = grid.half_diagonal + tol
    hit = np.zeros(len(cen), dtype=bool)
    for tri in mesh.triangles():
        lo, hi = tri.min(axis=0) - reach, tri.max(axis=0) + reach
        near = np.all((cen >= lo) & (cen <= hi), axis=1) & ~hit
        if np.any(near):
            d = point_triangle_distance(cen[near], tri)
            hit[np.flatnonzero(near)[d <= reach]] = True
    flags = np.zeros(grid.shape, dtype=bool)
    flags[tuple(idx[hit].T)] = True
    return VolumeMask(grid, flags)


def buffer_mask(src: VolumeMask, radius: float, space: VolumeMask | None = None) -> VolumeMask:
    """Voxels within ``radius`` (centroid to centroid, 3D Euclidean) of ``src``.

    The result is restricted to ``space`` when given; ``src`` itself is
    always kept.
    """
    if radius < 0:
        raise ValueError(f"buffer radius must be >= 0, got {radius}")
    grid = src.grid
    if src.count == 0:
        return VolumeMask.empty(grid)
    dist = ndimage.distance_transform_edt(~src.flags, sampling=grid.spacing)
    flags = dist <= radius * (1 + 1e-12) + 1e-9
    if space is not None:
        flags &= space.flags
    return VolumeMask(grid, flags | src.flags)
