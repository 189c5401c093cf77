"""Voxel lattice geometry and construction of the active modeling volume."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateInputError

# Boundary tolerance (m) for point-in-polygon tests; boundary counts as inside.
EDGE_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Regular voxel lattice.

    ``origin`` is the minimum corner of voxel (0, 0, 0); centroids sit at
    ``origin + (index + 0.5) * spacing``.
    """

    origin: tuple[float, float, float]
    nx: int
    ny: int
    nz: int
    dx: float = 10.0
    dy: float = 10.0
    dz: float = 10.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) <= 0:
            raise ValueError(f"grid counts must be positive, got {self.shape}")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def half_diagonal(self) -> float:
        return 0.5 * float(np.sqrt(self.dx**2 + self.dy**2 + self.dz**2))

    def axis_centroids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ox, oy, oz = self.origin
        return (
            ox + (np.arange(self.nx) + 0.5) * self.dx,
            oy + (np.arange(self.ny) + 0.5) * self.dy,
            oz + (np.arange(self.nz) + 0.5) * self.dz,
        )

    def centroid(self, i, j, k):
        """Centroid of voxel ``(i, j, k)``; accepts scalars or arrays."""
        ox, oy, oz = self.origin
        return (
            ox + (np.asarray(i) + 0.5) * self.dx,
            oy + (np.asarray(j) + 0.5) * self.dy,
            oz + (np.asarray(k) + 0.5) * self.dz,
        )

    def index_of(self, x, y, z):
        """Voxel index containing point(s) ``(x, y, z)``; no bounds check."""
        ox, oy, oz = self.origin
        return (
            np.floor((np.asarray(x) - ox) / self.dx).astype(int),
            np.floor((np.asarray(y) - oy) / self.dy).astype(int),
            np.floor((np.asarray(z) - oz) / self.dz).astype(int),
        )

    def contains_index(self, i, j, k) -> np.ndarray:
        i, j, k = np.asarray(i), np.asarray(j), np.asarray(k)
        return (
            (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny) & (k >= 0) & (k < self.nz)
        )

    def centroids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full ``(nx, ny, nz)`` arrays of centroid coordinates."""
        return np.meshgrid(*self.axis_centroids(), indexing="ij")

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, zmin, zmax, dx=10.0, dy=10.0, dz=10.0):
        """Smallest grid snapped to whole voxels that covers the given box."""
        ox = np.floor(xmin / dx) * dx
        oy = np.floor(ymin / dy) * dy
        oz = np.floor(zmin / dz) * dz
        nx = max(1, int(np.ceil((xmax - ox) / dx)))
        ny = max(1, int(np.ceil((ymax - oy) / dy)))
        nz = max(1, int(np.ceil((zmax - oz) / dz)))
        return cls((ox, oy, oz), nx, ny, nz, dx, dy, dz)


@dataclass(frozen=True)
class Polygon2D:
    """Simple polygon in map coordinates, vertices in counter-clockwise order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise DegenerateInputError("polygon needs at least 3 vertices")
        if self.area <= 0:
            raise DegenerateInputError("polygon must have positive area in CCW order")

    @property
    def area(self) -> float:
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def contains(self, x, y, tol: float = EDGE_TOL) -> np.ndarray:
        """Boundary-inclusive containment for a convex CCW polygon."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        v = self.vertices
        for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1]):
            ex, ey = x1 - x0, y1 - y0
            cross = ex * (y - y0) - ey * (x - x0)
            inside &= cross >= -tol * np.hypot(ex, ey)
        return inside


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Sequence[float]]) -> Polygon2D:
    """Convex hull by Andrew's monotone chain.

    Collinear boundary points are dropped, so only true corners remain.
    The result starts at the lowest-x (then lowest-y) point and runs CCW.
    """
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) < 3:
        raise DegenerateInputError(f"convex hull needs >= 3 distinct points, got {len(pts)}")

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInputError("all points are collinear")
    return Polygon2D(tuple(hull))


@dataclass(frozen=True)
class SurfacePair:
    """Upper (super) and lower (sub) bounding faces, one value per grid column.

    Arrays have shape ``(nx, ny)``; NaN marks a column where a face is undefined.
    """

    top: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        top = np.asarray(self.top, dtype=float)
        bottom = np.asarray(self.bottom, dtype=float)
        if top.shape != bottom.shape or top.ndim != 2:
            raise ValueError("super- and sub-face must be 2D arrays of equal shape")
        both = np.isfinite(top) & np.isfinite(bottom)
        if np.any(top[both] < bottom[both]):
            raise ConfigurationError("super-face lies below sub-face on some columns")
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bottom", bottom)


@dataclass(frozen=True, eq=False)
class VolumeMask:
    """Boolean membership over every voxel of a grid."""

    grid: GridSpec
    flags: np.ndarray = field(repr=False)
    count: int = field(init=False)

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.shape != self.grid.shape:
            raise ValueError(f"mask shape {flags.shape} does not match grid {self.grid.shape}")
        flags = flags.copy()
        flags.flags.writeable = False
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "count", int(flags.sum()))

    @classmethod
    def full(cls, grid: GridSpec) -> "VolumeMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid: GridSpec) -> "VolumeMask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @property
    def fraction(self) -> float:
        return self.count / self.grid.size

    def _check(self, other: "VolumeMask"):
        if other.grid != self.grid:
            raise ValueError("masks belong to different grids")

    def __and__(self, other: "VolumeMask") -> "VolumeMask":
        self._check(other)
        return VolumeMask(self.grid, self.flags & other.flags)

    def __or__(self, other: "VolumeMask") -> "VolumeMask":
        self._check(other)
        return VolumeMask(self.grid, self.flags | other.flags)

    def __invert__(self) -> "VolumeMask":
        return VolumeMask(self.grid, ~self.flags)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VolumeMask):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.flags, other.flags))

    def issubset(self, other: "VolumeMask") -> bool:
        self._check(other)
        return not np.any(self.flags & ~other.flags)

    def indices(self) -> np.ndarray:
        """``(count, 3)`` array of active (i, j, k), in C order."""
        return np.argwhere(self.flags)


def build_model_space(grid: GridSpec, hull: Polygon2D, surfaces: SurfacePair) -> VolumeMask:
    """Voxels whose centroid lies inside ``hull`` and between the two faces."""
    xc, yc, zc = grid.axis_centroids()
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    in_hull = hull.contains(X, Y)
    if surfaces.top.shape != (grid.nx, grid.ny):
        raise ConfigurationError(
            f"surfaces cover {surfaces.top.shape} columns, grid has {(grid.nx, grid.ny)}"
        )
    undefined = in_hull & ~(np.isfinite(surfaces.top) & np.isfinite(surfaces.bottom))
    if np.any(undefined):
        i, j = np.argwhere(undefined)[0]
        raise ConfigurationError(f"surfaces undefined on in-hull column ({i}, {j})")
    with np.errstate(invalid="ignore"):
        in_band = (zc[None, None, :] >= surfaces.bottom[:, :, None]) & (
            zc[None, None, :] <= surfaces.top[:, :, None]
        )
    return VolumeMask(grid, in_hull[:, :, None] & in_band)


def surfaces_from_collars(collars, hole_depths=None, grid: GridSpec | None = None, *,
                          method: str = "nearest", power: float = 2.0) -> SurfacePair:
    """Bounding faces from collar elevations and hole depths.

    ``collars`` is either a sequence of :class:`~voxwofe.boreholes.Collar`
    (depths taken from ``total_depth``) or an ``(n, 3)`` array of x, y, z with
    ``hole_depths`` given separately. ``method="nearest"`` assigns each column
    the values of its horizontally nearest collar (ties go to the earlier
    collar); ``method="idw"`` uses inverse-distance weighting instead.
    """
    if grid is None:
        raise TypeError("grid is required")
    if len(collars) == 0:
        raise DegenerateInputError("no collars given")
    if hasattr(collars[0], "total_depth"):
        xyz = np.array([(c.x, c.y, c.z) for c in collars], dtype=float)
        depth = np.array([c.total_depth for c in collars], dtype=float)
    else:
        xyz = np.asarray(collars, dtype=float).reshape(-1, 3)
        depth = np.asarray(hole_depths, dtype=float).reshape(-1)
    if depth.shape[0] != xyz.shape[0]:
        raise ValueError("one depth per collar required")

    xc, yc, _ = grid.axis_centroids()
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    d2 = (X[..., None] - xyz[:, 0]) ** 2 + (Y[..., None] - xyz[:, 1]) ** 2
    top_vals = xyz[:, 2]
    bot_vals = xyz[:, 2] - depth
    if method == "nearest":
        nearest = np.argmin(d2, axis=-1)
        return SurfacePair(top_vals[nearest], bot_vals[nearest])
    if method == "idw":
        exact = d2 == 0
        with np.errstate(divide="ignore"):
            w = np.where(exact, 0.0, d2 ** (-power / 2.0))
        hit = exact.any(axis=-1)
        w[hit] = exact[hit].astype(float)
        w /= w.sum(axis=-1, keepdims=True)
        return SurfacePair(w @ top_vals, w @ bot_vals)
    raise ValueError(f"unknown surface method {method!r}")
