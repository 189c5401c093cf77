"""Closest-point categorical and quadrant-search inverse-distance models.

Both interpolators evaluate at voxel centroids of the active mask. Samples
are put in a canonical order (sorted by x, y, z) first, and every tie is
resolved in favour of the earliest sample in that order, so results do not
depend on input order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .boreholes import PointSample
from .errors import ConfigurationError, DegenerateInputError
from .grid import GridSpec, VolumeMask

CHUNK = 2048
KD_STAGES = (32,)
MARGIN = 1e-9
SCAN_BUDGET = 2_000_000  # column-sample pairs per chunk
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class CategoricalModel:
    """Per-voxel category codes; ``codes`` indexes ``categories``, -1 off-mask."""

    mask: VolumeMask
    codes: np.ndarray = field(repr=False)
    categories: tuple[str, ...]

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int32)
        if codes.shape != self.mask.grid.shape:
            raise ValueError("code array does not match the grid")
        active = codes[self.mask.flags]
        if active.size and (active.min() < 0 or active.max() >= len(self.categories)):
            raise ValueError("active voxel code outside the category dictionary")
        codes = np.where(self.mask.flags, codes, -1).astype(np.int32)
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))

    @property
    def grid(self) -> GridSpec:
        return self.mask.grid

    def unit_mask(self, category: str) -> VolumeMask:
        if category not in self.categories:
            return VolumeMask.empty(self.grid)
        return VolumeMask(self.grid, self.codes == self.categories.index(category))

    def labels(self) -> np.ndarray:
        """Object array of category names, None off-mask."""
        names = np.array(self.categories + (None,), dtype=object)
        return names[self.codes]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoricalModel):
            return NotImplemented
        return self.mask == other.mask and bool(
            np.array_equal(self.labels(), other.labels())
        )


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """Per-voxel numeric values, NaN off-mask."""

    mask: VolumeMask
    values: np.ndarray = field(repr=False)
    unit: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.mask.grid.shape:
            raise ValueError("value array does not match the grid")
        values = np.where(self.mask.flags, values, np.nan)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> GridSpec:
        return self.mask.grid

    def active_values(self) -> np.ndarray:
        return self.values[self.mask.flags]


def canonical_order(samples: Sequence[PointSample]) -> list[PointSample]:
    return sorted(samples, key=lambda s: (s.x, s.y, s.z))


def _sample_arrays(samples):
    ordered = canonical_order(samples)
    xyz = np.array([(s.x, s.y, s.z) for s in ordered], dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(xyz)):
        raise DegenerateInputError("sample coordinates must be finite")
    return ordered, xyz


def _map_chunks(fn, n: int, workers: int = 1, chunk: int = CHUNK) -> list:
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: fn(*b), bounds))
    return [fn(a, b) for a, b in bounds]


def _active_centroids(mask: VolumeMask) -> tuple[np.ndarray, np.ndarray]:
    idx = mask.indices()
    cx, cy, cz = mask.grid.centroid(idx[:, 0], idx[:, 1], idx[:, 2])
    return idx, np.column_stack([cx, cy, cz])


def _sector_nearest(c, pts, cand, sectors: int, anisotropy: float):
    """Closest candidate per horizontal sector for each centroid row of ``c``.

    ``pts`` holds candidate coordinates ``(n, k, 3)`` and ``cand`` the
    matching sample indices. Returns squared
    distances ``(n, sectors)`` (inf for empty sectors) and picks (-1 if empty),
    with ties going to the lowest sample index.
    """
    ddx = pts[..., 0] - c[:, None, 0]
    ddy = pts[..., 1] - c[:, None, 1]
    ddz = (pts[..., 2] - c[:, None, 2]) / anisotropy
    d2 = ddx * ddx + ddy * ddy + ddz * ddz
    sec = sector_of(ddx, ddy, sectors)
    n = len(c)
    dmin = np.full((n, sectors), np.inf)
    pick = np.full((n, sectors), -1, dtype=np.int64)
    big = np.iinfo(np.int64).max
    for s in range(sectors):
        masked = np.where(sec == s, d2, np.inf)
        m = masked.min(axis=1)
        tied = np.where((masked == m[:, None]) & np.isfinite(masked), cand, big).min(axis=1)
        dmin[:, s] = m
        pick[:, s] = np.where(np.isfinite(m), tied, -1)
    return dmin, pick


def _empty_sectors(xyz, cen, sectors: int) -> np.ndarray:
    """``(n, sectors)`` flags: no sample at all lies in that sector of the row's column.

    Sector membership depends only on horizontal offset, so it is shared by
    every centroid in a column.
    """
    xy = np.unique(xyz[:, :2], axis=0)
    cols, inverse = np.unique(cen[:, :2], axis=0, return_inverse=True)
    occupied = np.zeros((len(cols), sectors), dtype=bool)
    step = max(1, SCAN_BUDGET // max(len(xy), 1))
    for a in range(0, len(cols), step):
        c = cols[a:a + step]
        dx = xy[None, :, 0] - c[:, None, 0]
        dy = xy[None, :, 1] - c[:, None, 1]
        sec = sector_of(dx, dy, sectors)
        for s in range(sectors):
            occupied[a:a + step, s] = np.any(sec == s, axis=1)
    return ~occupied[inverse.reshape(-1)]


def _column_scan(xyz, cen, sectors: int, anisotropy: float):
    """Full per-sector scan, sharing horizontal work among centroids of one column.

    Samples are stably sorted by sector for each column, so the first
    minimum inside a sector block is also the lowest sample index.
    """
    n = len(cen)
    dmin = np.full((n, sectors), np.inf)
    pick = np.full((n, sectors), -1, dtype=np.int64)
    cols, inverse = np.unique(cen[:, :2], axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order_rows = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order_rows], np.arange(len(cols) + 1))
    for c, (cx, cy) in enumerate(cols):
        rows = order_rows[bounds[c]:bounds[c + 1]]
        ddx = xyz[:, 0] - cx
        ddy = xyz[:, 1] - cy
        sec = sector_of(ddx, ddy, sectors)
        order = np.argsort(sec, kind="stable")
        edges = np.searchsorted(sec[order], np.arange(sectors + 1))
        h2 = (ddx * ddx + ddy * ddy)[order]
        ddz = (xyz[order, 2][None, :] - cen[rows, 2][:, None]) / anisotropy
        d2 = h2[None, :] + ddz * ddz
        for s in range(sectors):
            a, b = edges[s], edges[s + 1]
            if a == b:
                continue
            j = np.argmin(d2[:, a:b], axis=1)
            dmin[rows, s] = d2[np.arange(len(rows)), a + j]
            pick[rows, s] = order[a + j]
    return dmin, pick


def _sector_search(xyz, cen, sectors: int, anisotropy: float, workers: int = 1):
    """Per-sector nearest samples for every centroid, identical to a full scan.

    A KD-tree proposes the k nearest samples; a row is accepted only when
    every sector is either empty for its whole column or won by a candidate
    strictly closer than the k-th one, so no sample outside the candidate
    set could win or tie. Rows left unresolved fall back to a full scan.
    """
    n, n_samples = len(cen), len(xyz)
    empty = _empty_sectors(xyz, cen, sectors)
    dmin = np.full((n, sectors), np.inf)
    pick = np.full((n, sectors), -1, dtype=np.int64)
    scale = np.array([1.0, 1.0, 1.0 / anisotropy])
    pending = np.arange(n)
    tree = cKDTree(xyz * scale) if KD_STAGES and n_samples > KD_STAGES[0] else None
    for k in KD_STAGES if tree is not None else ():
        if k >= n_samples or pending.size == 0:
            break
        kd, cand = tree.query(cen[pending] * scale, k=k, workers=workers)

        def run(a, b, rows=pending, kd=kd, cand=cand):
            dm, pk = _sector_nearest(cen[rows[a:b]], xyz[cand[a:b]], cand[a:b], sectors, anisotropy)
            limit = kd[a:b, -1:] * (1 - MARGIN)
            good = np.all((np.sqrt(dm) * (1 + MARGIN) < limit) | empty[rows[a:b]], axis=1)
            return dm, pk, good

        parts = _map_chunks(run, len(pending), workers)
        dm = np.concatenate([p[0] for p in parts])
        pk = np.concatenate([p[1] for p in parts])
        good = np.concatenate([p[2] for p in parts])
        dmin[pending[good]] = dm[good]
        pick[pending[good]] = pk[good]
        pending = pending[~good]
    if pending.size:
        dm, pk = _column_scan(xyz, cen[pending], sectors, anisotropy)
        dmin[pending] = dm
        pick[pending] = pk
    return dmin, pick


def nearest_value(samples: Sequence[PointSample], mask: VolumeMask, *,
                  anisotropy: float = 1.0, workers: int = 1) -> CategoricalModel:
    """Each active voxel takes the value of its nearest sample.

    ``anisotropy`` divides vertical separation before measuring distance.
    """
    if len(samples) == 0:
        raise DegenerateInputError("nearest_value needs at least one sample")
    ordered, xyz = _sample_arrays(samples)
    categories = tuple(sorted({str(s.value) for s in ordered}))
    lookup = {c: n for n, c in enumerate(categories)}
    sample_codes = np.array([lookup[str(s.value)] for s in ordered], dtype=np.int32)
    idx, cen = _active_centroids(mask)
    _, pick = _sector_search(xyz, cen, 1, anisotropy, workers)
    codes = np.full(mask.grid.shape, -1, dtype=np.int32)
    codes[idx[:, 0], idx[:, 1], idx[:, 2]] = sample_codes[pick[:, 0]]
    return CategoricalModel(mask, codes, categories)


def top_active_layer(mask: VolumeMask) -> np.ndarray:
    """Index of the highest active voxel per column; -1 for empty columns."""
    flags = mask.flags
    nz = flags.shape[2]
    any_active = flags.any(axis=2)
    top = nz - 1 - np.argmax(flags[:, :, ::-1], axis=2)
    return np.where(any_active, top, -1)


def constrain_surface(model: CategoricalModel, map_units) -> CategoricalModel:
    """Overwrite the top active voxel of every column with the mapped unit.

    ``map_units`` is an ``(nx, ny)`` array of unit names; None or "" marks
    a gap, which is an error over any active column.
    """
    raster = np.asarray(map_units, dtype=object)
    grid = model.grid
    if raster.shape != (grid.nx, grid.ny):
        raise ConfigurationError(f"map raster shape {raster.shape} != columns {(grid.nx, grid.ny)}")
    top = top_active_layer(model.mask)
    gaps = (top >= 0) & np.vectorize(lambda v: v is None or v == "" or v != v, otypes=[bool])(raster)
    if np.any(gaps):
        i, j = np.argwhere(gaps)[0]
        raise ConfigurationError(f"map raster has no unit over active column ({i}, {j})")
    cols = np.argwhere(top >= 0)
    new_names = {str(raster[i, j]) for i, j in cols}
    categories = model.categories + tuple(sorted(new_names - set(model.categories)))
    lookup = {c: n for n, c in enumerate(categories)}
    codes = np.array(model.codes)
    for i, j in cols:
        codes[i, j, top[i, j]] = lookup[str(raster[i, j])]
    return CategoricalModel(model.mask, codes, categories)


def sector_of(dx, dy, sectors: int):
    """Horizontal sector index of offset ``(dx, dy)``.

    Azimuth 0 points along +x (grid east) and increases counter-clockwise;
    each sector includes its lower edge.
    """
    az = np.mod(np.arctan2(dy, dx), TWO_PI)
    s = np.floor(az / (TWO_PI / sectors)).astype(np.int64)
    return np.minimum(s, sectors - 1)


def idw_anisotropic(samples: Sequence[PointSample], mask: VolumeMask, power: float = 2.0,
                    sectors: int = 4, *, anisotropy: float = 1.0, unit: str = "",
                    workers: int = 1) -> ContinuousModel:
    """Inverse-distance weighting using the closest sample in each azimuth sector.

    Around every voxel the horizontal plane is split into ``sectors`` equal
    sectors; the nearest sample of each non-empty sector contributes with
    weight ``d**-power``. A sample at zero distance is returned exactly.
    ``anisotropy`` divides vertical separation (1 = isotropic).
    """
    if len(samples) == 0:
        raise DegenerateInputError("idw_anisotropic needs at least one sample")
    if power <= 0:
        raise ValueError(f"power must be > 0, got {power}")
    if sectors < 1:
        raise ValueError(f"sectors must be >= 1, got {sectors}")
    ordered, xyz = _sample_arrays(samples)
    vals = np.array([float(s.value) for s in ordered])
    idx, cen = _active_centroids(mask)
    dmin, pick = _sector_search(xyz, cen, sectors, anisotropy, workers)
    w = np.zeros(dmin.shape)
    ok = np.isfinite(dmin) & (dmin > 0)
    w[ok] = dmin[ok] ** (-0.5 * power)
    num = np.zeros(len(cen))
    den = np.zeros(len(cen))
    for s in range(sectors):
        num += w[:, s] * vals[np.maximum(pick[:, s], 0)]
        den += w[:, s]
    result = np.empty(len(cen))
    hit = np.any(dmin == 0, axis=1)
    exact = np.where(dmin == 0, pick, len(vals)).min(axis=1)
    result[hit] = vals[exact[hit]]
    if np.any(den[~hit] == 0):
        raise DegenerateInputError("no sample found in any sector")
    result[~hit] = num[~hit] / den[~hit]
    values = np.full(mask.grid.shape, np.nan)
    values[idx[:, 0], idx[:, 1], idx[:, 2]] = result
    return ContinuousModel(mask, values, unit)
