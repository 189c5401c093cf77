"""Borehole collar/interval tables: parsing, validation and desurveying.

CSV layouts (UTF-8, header row, comma separated)::

    collars     hole_id,x,y,z,total_depth
    categorical hole_id,from,to,attribute,code
    assays      hole_id,from,to,element,value,unit      (unit is % or ppm)
"""

from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from .errors import BoreholeDataError

COLLAR_FIELDS = ("hole_id", "x", "y", "z", "total_depth")
CATEGORICAL_FIELDS = ("hole_id", "from", "to", "attribute", "code")
ASSAY_FIELDS = ("hole_id", "from", "to", "element", "value", "unit")
UNITS = ("%", "ppm")

Value = Union[str, float]


@dataclass(frozen=True)
class Collar:
    hole_id: str
    x: float
    y: float
    z: float
    total_depth: float


@dataclass(frozen=True)
class IntervalLog:
    """One downhole interval.

    ``attribute`` is the log name (``lithology``, ``alteration``...) for
    categorical logs or the element symbol for assays; ``unit`` is None for
    categorical logs.
    """

    hole_id: str
    start: float
    end: float
    attribute: str
    value: Value
    unit: str | None = None

    @property
    def is_numeric(self) -> bool:
        return self.unit is not None

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PointSample:
    x: float
    y: float
    z: float
    value: Value
    hole_id: str = ""


@dataclass
class BoreholeSet:
    collars: dict[str, Collar]
    intervals: list[IntervalLog] = field(default_factory=list)

    def attributes(self) -> list[str]:
        return sorted({iv.attribute for iv in self.intervals})

    def logs(self, attribute: str) -> list[IntervalLog]:
        return [iv for iv in self.intervals if iv.attribute == attribute]

    def __len__(self) -> int:
        return len(self.collars)


def _read_rows(table, name: str, expected: tuple[str, ...]) -> list[dict]:
    """Rows of a CSV given as a path, an open file, CSV text, or dicts."""
    if isinstance(table, (str, os.PathLike)) and os.path.exists(table):
        with open(table, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
            header = rows[0].keys() if rows else None
    elif isinstance(table, str):
        reader = csv.DictReader(io.StringIO(table))
        rows = list(reader)
        header = reader.fieldnames
    elif hasattr(table, "read"):
        reader = csv.DictReader(table)
        rows = list(reader)
        header = reader.fieldnames
    else:
        rows = [dict(r) for r in table]
        header = rows[0].keys() if rows else None
    if header is not None:
        missing = [c for c in expected if c not in header]
        if missing:
            raise BoreholeDataError([(name, 0, f"missing column(s) {', '.join(missing)}")])
    return rows


def _number(raw, issues, table, row, column) -> float | None:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        issues.append((table, row, f"{column} {raw!r} is not numeric"))
        return None
    if not math.isfinite(value):
        issues.append((table, row, f"{column} {raw!r} is not finite"))
        return None
    return value


def parse_boreholes(collar_table, interval_tables: Iterable = (), assay_tables: Iterable = ()) -> BoreholeSet:
    """Parse and validate collar, categorical-interval and assay tables.

    Tables are file paths, open files, CSV text or sequences of dicts. All
    problems are gathered and raised together as a
    :class:`~voxwofe.errors.BoreholeDataError` listing row and reason.
    Assay tables may also be passed in ``interval_tables``; a table is
    treated as assays when it carries an ``element`` column.
    """
    issues: list[tuple[str, int, str]] = []
    collars: dict[str, Collar] = {}
    for n, r in enumerate(_read_rows(collar_table, "collars", COLLAR_FIELDS), start=1):
        hole = (r.get("hole_id") or "").strip()
        nums = [_number(r.get(c), issues, "collars", n, c) for c in COLLAR_FIELDS[1:]]
        if not hole:
            issues.append(("collars", n, "empty hole_id"))
            continue
        if hole in collars:
            issues.append(("collars", n, f"duplicate hole_id {hole!r}"))
            continue
        if any(v is None for v in nums):
            continue
        if nums[3] <= 0:
            issues.append(("collars", n, f"total_depth must be > 0, got {nums[3]}"))
            continue
        collars[hole] = Collar(hole, *nums)

    intervals: list[IntervalLog] = []
    origin: list[tuple[str, int]] = []
    tables = [(t, None) for t in interval_tables] + [(t, True) for t in assay_tables]
    for t_index, (table, assay_hint) in enumerate(tables):
        rows = _read_rows(table, f"intervals[{t_index}]", ("hole_id", "from", "to"))
        is_assay = assay_hint or bool(rows and "element" in rows[0])
        name = f"assays[{t_index}]" if is_assay else f"intervals[{t_index}]"
        if rows:
            expected = ASSAY_FIELDS if is_assay else CATEGORICAL_FIELDS
            missing = [c for c in expected if c not in rows[0]]
            if missing:
                issues.append((name, 0, f"missing column(s) {', '.join(missing)}"))
                continue
        for n, r in enumerate(rows, start=1):
            hole = (r.get("hole_id") or "").strip()
            start = _number(r.get("from"), issues, name, n, "from")
            end = _number(r.get("to"), issues, name, n, "to")
            if hole not in collars:
                issues.append((name, n, f"unknown hole_id {hole!r}"))
                continue
            if start is None or end is None:
                continue
            if start < 0:
                issues.append((name, n, f"from {start} is negative"))
                continue
            if start >= end:
                issues.append((name, n, f"from {start} >= to {end}"))
                continue
            if end > collars[hole].total_depth:
                issues.append((name, n, f"to {end} exceeds total_depth {collars[hole].total_depth}"))
                continue
            if is_assay:
                attribute = (r.get("element") or "").strip()
                value = _number(r.get("value"), issues, name, n, "value")
                unit = (r.get("unit") or "").strip()
                if value is None:
                    continue
                if value < 0:
                    issues.append((name, n, f"negative concentration {value}"))
                    continue
                if unit not in UNITS:
                    issues.append((name, n, f"unit {unit!r} not one of {UNITS}"))
                    continue
            else:
                attribute = (r.get("attribute") or "").strip()
                value = (r.get("code") or "").strip()
                unit = None
                if not value:
                    issues.append((name, n, "empty code"))
                    continue
            if not attribute:
                issues.append((name, n, "empty attribute/element"))
                continue
            intervals.append(IntervalLog(hole, start, end, attribute, value, unit))
            origin.append((name, n))

    # overlaps within one hole and attribute
    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for idx, iv in enumerate(intervals):
        groups[(iv.hole_id, iv.attribute)].append(idx)
    for (hole, attribute), members in groups.items():
        members.sort(key=lambda idx: (intervals[idx].start, intervals[idx].end))
        for a, b in zip(members, members[1:]):
            prev, cur = intervals[a], intervals[b]
            if cur.start < prev.end:
                table, row = origin[b]
                issues.append(
                    (table, row, f"{attribute} interval {cur.start}-{cur.end} overlaps "
                                 f"{prev.start}-{prev.end} in hole {hole!r}")
                )

    units: dict[str, str] = {}
    for iv in intervals:
        if iv.unit is not None and units.setdefault(iv.attribute, iv.unit) != iv.unit:
            issues.append(("assays", 0, f"element {iv.attribute} recorded in both "
                                        f"{units[iv.attribute]} and {iv.unit}"))
            break

    if issues:
        raise BoreholeDataError(issues)
    intervals.sort(key=lambda iv: (iv.hole_id, iv.attribute, iv.start))
    return BoreholeSet(collars, intervals)


def vertical_trace(collar: Collar, depth: float) -> tuple[float, float, float]:
    return collar.x, collar.y, collar.z - depth


def split_interval(start: float, end: float, step: float) -> list[tuple[float, float]]:
    """Cut ``[start, end]`` into consecutive pieces of ``step``; the last may be shorter."""
    pieces = []
    top = start
    while end - top > step * (1 + 1e-12):
        pieces.append((top, top + step))
        top += step
    pieces.append((top, end))
    return pieces


def desurvey(
    boreholes: BoreholeSet,
    step: float = 10.0,
    attribute: str | None = None,
    trace: Callable[[Collar, float], tuple[float, float, float]] = vertical_trace,
) -> list[PointSample]:
    """Point samples at segment midpoints along each hole.

    Every interval is cut into segments of at most ``step`` metres and one
    sample is placed at each segment midpoint, carrying the interval value.
    ``trace`` maps a downhole depth to coordinates; the default treats holes
    as vertical. Output order is by hole id, attribute, then depth.
    """
    if step <= 0:
        raise ValueError(f"desurvey step must be > 0, got {step}")
    out = []
    for iv in boreholes.intervals:
        if attribute is not None and iv.attribute != attribute:
            continue
        collar = boreholes.collars[iv.hole_id]
        for top, bottom in split_interval(iv.start, iv.end, step):
            x, y, z = trace(collar, 0.5 * (top + bottom))
            out.append(PointSample(x, y, z, iv.value, iv.hole_id))
    return out
