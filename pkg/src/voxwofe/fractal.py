"""Concentration-volume curves, segmented log-log fits and threshold classing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError
from .grid import VolumeMask
from .interpolate import CategoricalModel

MAX_DISTINCT = 512
MIN_SEGMENT_POINTS = 3
ANOMALY_LABELS = ("possible", "probable", "certain")


@dataclass(frozen=True, eq=False)
class CVCurve:
    """Cumulative volume ``V(>= v)`` at ascending thresholds ``v``.

    ``dropped`` counts active voxels left out for being non-positive or NaN.
    """

    values: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.values)

    def log(self) -> tuple[np.ndarray, np.ndarray]:
        return np.log10(self.values), np.log10(self.volumes)


@dataclass(frozen=True, eq=False)
class SegmentedFit:
    """Piecewise-linear fit in (log10 v, log10 V) space.

    ``starts`` are curve indices where each segment begins; breakpoints are
    the curve values at the starts of segments 2..n.
    """

    starts: tuple[int, ...]
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    residual: float


def cv_curve(values, mask: VolumeMask | None = None, max_distinct: int = MAX_DISTINCT) -> CVCurve:
    """Concentration-volume curve of the positive values on ``mask``.

    Uses every distinct value when there are at most ``max_distinct``,
    otherwise that many log-spaced thresholds between min and max.
    """
    v = np.asarray(getattr(values, "values", values), dtype=float)
    if mask is not None:
        v = v[mask.flags]
    v = v.ravel()
    keep = np.isfinite(v) & (v > 0)
    dropped = int(v.size - np.count_nonzero(keep))
    v = np.sort(v[keep])
    if v.size == 0:
        raise DegenerateInputError("no positive values for a concentration-volume curve")
    distinct = np.unique(v)
    if len(distinct) <= max_distinct:
        thresholds = distinct
    else:
        thresholds = np.geomspace(distinct[0], distinct[-1], max_distinct)
        thresholds[0], thresholds[-1] = distinct[0], distinct[-1]
    volumes = v.size - np.searchsorted(v, thresholds, side="left")
    return CVCurve(thresholds, volumes.astype(float), dropped)


def _segment_costs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """SSE of the least-squares line through points ``a..b-1`` at ``cost[a, b]``."""
    n = len(x)
    px = np.concatenate([[0.0], np.cumsum(x)])
    py = np.concatenate([[0.0], np.cumsum(y)])
    pxx = np.concatenate([[0.0], np.cumsum(x * x)])
    pxy = np.concatenate([[0.0], np.cumsum(x * y)])
    pyy = np.concatenate([[0.0], np.cumsum(y * y)])
    a = np.arange(n + 1)[:, None]
    b = np.arange(n + 1)[None, :]
    m = (b - a).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sx, sy = px[b] - px[a], py[b] - py[a]
        sxx = pxx[b] - pxx[a] - sx * sx / m
        sxy = pxy[b] - pxy[a] - sx * sy / m
        syy = pyy[b] - pyy[a] - sy * sy / m
        cost = np.where(sxx > 0, syy - sxy * sxy / sxx, syy)
    cost = np.maximum(cost, 0.0)
    cost[m < 1] = np.inf
    return cost


def _line(x, y):
    if np.ptp(x) == 0:
        return 0.0, float(np.mean(y))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_segments(curve: CVCurve, n_segments: int = 4, min_points: int = MIN_SEGMENT_POINTS) -> SegmentedFit:
    """Globally least-squares piecewise-linear fit by dynamic programming.

    Segments are disjoint runs of consecutive curve points, each at least
    ``min_points`` long, and each gets its own line.
    """
    if n_segments < 1:
        raise ValueError(f"n_segments must be >= 1, got {n_segments}")
    n = len(curve)
    if n < max(2 * n_segments, min_points * n_segments):
        raise DegenerateInputError(
            f"{n} curve points cannot hold {n_segments} segments of >= {min_points} points"
        )
    x, y = curve.log()
    cost = _segment_costs(x, y)
    lengths = np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]
    cost[lengths < min_points] = np.inf

    best = np.full((n_segments + 1, n + 1), np.inf)
    back = np.zeros((n_segments + 1, n + 1), dtype=int)
    best[0, 0] = 0.0
    for s in range(1, n_segments + 1):
        totals = best[s - 1][:, None] + cost
        back[s] = np.argmin(totals, axis=0)
        best[s] = totals[back[s], np.arange(n + 1)]
    starts = []
    end = n
    for s in range(n_segments, 0, -1):
        start = int(back[s, end])
        starts.append(start)
        end = start
    starts.reverse()
    bounds = starts + [n]
    lines = [_line(x[a:b], y[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    # recompute directly; prefix-sum costs lose precision near zero
    residual = sum(
        float(np.sum((y[a:b] - (m * x[a:b] + c)) ** 2))
        for (a, b), (m, c) in zip(zip(bounds[:-1], bounds[1:]), lines)
    )
    return SegmentedFit(
        starts=tuple(starts),
        breakpoints=tuple(float(curve.values[s]) for s in starts[1:]),
        slopes=tuple(l[0] for l in lines),
        intercepts=tuple(l[1] for l in lines),
        residual=residual,
    )


def class_labels(n_thresholds: int) -> tuple[str, ...]:
    if n_thresholds <= len(ANOMALY_LABELS):
        return ("background",) + ANOMALY_LABELS[len(ANOMALY_LABELS) - n_thresholds:]
    return ("background",) + tuple(f"class_{n}" for n in range(1, n_thresholds + 1))


def classify(model, thresholds: Sequence[float], mask: VolumeMask | None = None) -> CategoricalModel:
    """Class = number of thresholds at or below the value.

    With three thresholds the classes are background, possible, probable
    and certain anomaly; fewer thresholds drop the lower anomaly labels.
    Voxels without a finite value are left in the background class.
    """
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"thresholds must be strictly ascending, got {list(thresholds)}")
    mask = getattr(model, "mask", mask)
    if mask is None:
        raise TypeError("mask required for plain arrays")
    values = np.asarray(getattr(model, "values", model), dtype=float)
    classes = np.searchsorted(t, np.nan_to_num(values, nan=-np.inf), side="right")
    return CategoricalModel(mask, classes, class_labels(len(t)))
