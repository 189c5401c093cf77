"""Stage-by-stage prospectivity pipeline with resumable CSV intermediates.

Stages run in the order of :data:`STAGES`. Each reads only what earlier
stages wrote to the output directory, so running them one at a time gives
the same files as :func:`run_pipeline`. Intermediate files start with a
``# voxwofe-schema N`` line and are rejected when ``N`` differs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import warnings
from pathlib import Path

import numpy as np

from . import export
from .boreholes import PointSample, desurvey, parse_boreholes
from .config import PipelineConfig
from .errors import ConfigurationError, PipelineError, SchemaVersionError
from .fractal import classify, cv_curve, fit_segments
from .grid import GridSpec, Polygon2D, SurfacePair, VolumeMask, build_model_space, convex_hull, surfaces_from_collars
from .interpolate import ContinuousModel, constrain_surface, idw_anisotropic, nearest_value
from .structures import buffer_mask, extrude_ribbon, read_fault_traces, voxelize_mesh
from .validate import linear_fuzzify, pv_curves
from .wofe import (BINARY, CLASSED, ContingencyCounts, EvidenceLayer, FuzzyClassRecord, WeightRecord,
                   binary_layer, check_training, class_index, decile_classes, integrate,
                   prior_from_training, select_evidence, weigh_classes)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"voxwofe-schema {SCHEMA_VERSION}"
STAGES = ("ingest", "interp", "evidence", "weights", "integrate", "threshold", "validate", "export")
PROB_FIELDS = ("posterior", "studentized")


# --- intermediate file helpers ----------------------------------------------

def _write(path, header, rows):
    return export.write_rows(path, header, rows, preamble=(SCHEMA_LINE,))


def _read(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing intermediate {path}; run the earlier stages first")
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {SCHEMA_LINE}":
            raise SchemaVersionError(
                f"{path} has schema {first.lstrip('# ') or 'none'!r}, expected {SCHEMA_LINE!r}"
            )
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _columns(path) -> dict[str, list[str]]:
    header, rows = _read(path)
    cols = list(zip(*rows)) if rows else [()] * len(header)
    return {h: list(c) for h, c in zip(header, cols)}


def _voxel_arrays(path, grid: GridSpec, names, dtype=float, fill=np.nan) -> dict[str, np.ndarray]:
    cols = _columns(path)
    i, j, k = (np.array(cols[c], dtype=int) for c in ("i", "j", "k"))
    out = {}
    for name in names:
        arr = np.full(grid.shape, fill, dtype=dtype)
        arr[i, j, k] = np.array(cols[name], dtype=dtype)
        out[name] = arr
    return out


def write_space_file(path, grid: GridSpec, hull: Polygon2D):
    lines = [f"# {SCHEMA_LINE}", "[grid]"]
    for key, value in zip(("origin_x", "origin_y", "origin_z"), grid.origin):
        lines.append(f"{key} = {export.fmt(value)}")
    for key in ("nx", "ny", "nz", "dx", "dy", "dz"):
        lines.append(f"{key} = {export.fmt(getattr(grid, key))}")
    lines.append("[hull]")
    for n, (x, y) in enumerate(hull.vertices):
        lines.append(f"vertex_{n} = {export.fmt(x)}, {export.fmt(y)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_space_file(path) -> tuple[GridSpec, Polygon2D]:
    path = Path(path)
    text = path.read_text(encoding="utf-8") if path.is_file() else ""
    if not text:
        raise FileNotFoundError(f"missing intermediate {path}; run the ingest stage first")
    if text.splitlines()[0].strip() != f"# {SCHEMA_LINE}":
        raise SchemaVersionError(f"{path} was written by another schema version")
    section, values, vertices = None, {}, []
    for line in text.splitlines()[1:]:
        line = line.strip()
        if line.startswith("["):
            section = line.strip("[]")
        elif "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
            if section == "grid":
                values[key] = value
            else:
                vertices.append(tuple(float(v) for v in value.split(",")))
    grid = GridSpec(
        tuple(float(values[k]) for k in ("origin_x", "origin_y", "origin_z")),
        *(int(values[k]) for k in ("nx", "ny", "nz")),
        *(float(values[k]) for k in ("dx", "dy", "dz")),
    )
    return grid, Polygon2D(tuple(vertices))


def load_space(out: Path) -> VolumeMask:
    grid, _ = read_space_file(out / "space.cfg")
    flags = _voxel_arrays(out / "space.csv", grid, ["flag"], dtype=int, fill=0)["flag"]
    return VolumeMask(grid, flags.astype(bool))


# --- stages -------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Parse boreholes, build grid, hull, bounding faces and the modeling space."""
    cfg.check_paths()
    tables = [cfg.paths["intervals"]] if "intervals" in cfg.paths else []
    holes = parse_boreholes(cfg.paths["collars"], tables, [cfg.paths["assays"]])
    collars = list(holes.collars.values())
    if cfg.origin is not None:
        grid = GridSpec(cfg.origin, *cfg.counts, *cfg.spacing)
    else:
        xs = [c.x for c in collars]
        ys = [c.y for c in collars]
        grid = GridSpec.covering(min(xs), max(xs), min(ys), max(ys),
                                 min(c.z - c.total_depth for c in collars), max(c.z for c in collars),
                                 *cfg.spacing)
    hull = convex_hull([(c.x, c.y) for c in collars])
    surfaces = surfaces_from_collars(collars, grid=grid, method=cfg.surface_method)
    space = build_model_space(grid, hull, surfaces)
    if space.count == 0:
        raise ConfigurationError("modeling space is empty")

    write_space_file(out / "space.cfg", grid, hull)
    _write(out / "space.csv", ("i", "j", "k", "flag"),
           ((int(i), int(j), int(k), int(f)) for (i, j, k), f in
            zip(np.indices(grid.shape).reshape(3, -1).T, space.flags.ravel())))
    _write(out / "surfaces.csv", ("i", "j", "top", "bottom"),
           ((i, j, surfaces.top[i, j], surfaces.bottom[i, j])
            for i in range(grid.nx) for j in range(grid.ny)))

    rows = []
    for attr in holes.attributes():
        for s in desurvey(holes, cfg.step, attr):
            kind = "numeric" if isinstance(s.value, float) else "categorical"
            rows.append((attr, kind, s.hole_id, s.x, s.y, s.z, s.value))
    if "sections" in cfg.paths:
        with open(cfg.paths["sections"], newline="", encoding="utf-8") as fh:
            for n, r in enumerate(csv.DictReader(fh), start=1):
                try:
                    rows.append((r["attribute"].strip(), "categorical", f"section:{n}",
                                 float(r["x"]), float(r["y"]), float(r["z"]), r["code"].strip()))
                except (KeyError, ValueError) as exc:
                    raise ConfigurationError(f"{cfg.paths['sections']} row {n}: {exc}") from None
    _write(out / "samples.csv", ("attribute", "kind", "hole_id", "x", "y", "z", "value"), rows)
    units = {iv.attribute: iv.unit for iv in holes.intervals if iv.unit}
    _write(out / "units.csv", ("element", "unit"), sorted(units.items()))
    return {"holes": len(holes), "active_voxels": space.count, "grid": grid}


def stage_interp(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Closest-point categorical models and quadrant-IDW element models."""
    space = load_space(out)
    cols = _columns(out / "samples.csv")
    units = dict(zip(*_columns(out / "units.csv").values())) if (out / "units.csv").is_file() else {}
    by_attr: dict[str, list[PointSample]] = {}
    kinds: dict[str, str] = {}
    for attr, kind, hole, x, y, z, value in zip(*(cols[c] for c in
                                                 ("attribute", "kind", "hole_id", "x", "y", "z", "value"))):
        kinds[attr] = kind
        v = float(value) if kind == "numeric" else value
        by_attr.setdefault(attr, []).append(PointSample(float(x), float(y), float(z), v, hole))

    raster = _map_raster(cfg, space.grid)
    categorical = [a for a in sorted(by_attr) if kinds[a] == "categorical"
                   and (cfg.attributes is None or a in cfg.attributes)]
    elements = [cfg.training_element] + [e for e in cfg.elements if e != cfg.training_element]
    missing = [e for e in elements if e not in by_attr]
    if missing:
        raise ConfigurationError(f"no assays for element(s) {', '.join(missing)}")

    fields: dict[str, np.ndarray] = {}
    for attr in categorical:
        model = nearest_value(by_attr[attr], space, anisotropy=cfg.anisotropy, workers=threads)
        if attr in raster:
            model = constrain_surface(model, raster[attr])
        fields[attr] = model.labels()
    for element in elements:
        model = idw_anisotropic(by_attr[element], space, cfg.power, cfg.sectors,
                                anisotropy=cfg.anisotropy, unit=units.get(element, ""), workers=threads)
        fields[element] = model.values
    export.write_model_csv(out / "models.csv", space, fields, preamble=(SCHEMA_LINE,))
    meta = [(a, "categorical", "") for a in categorical] + [(e, "numeric", units.get(e, "")) for e in elements]
    _write(out / "models_index.csv", ("name", "kind", "unit"), meta)
    return {"categorical": categorical, "elements": elements}


def _map_raster(cfg: PipelineConfig, grid: GridSpec) -> dict[str, np.ndarray]:
    if "map" not in cfg.paths:
        return {}
    rasters: dict[str, np.ndarray] = {}
    with open(cfg.paths["map"], newline="", encoding="utf-8") as fh:
        for n, r in enumerate(csv.DictReader(fh), start=1):
            try:
                x, y = float(r["x"]), float(r["y"])
                attr, code = r["attribute"].strip(), r["code"].strip()
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"{cfg.paths['map']} row {n}: {exc}") from None
            i, j, _ = grid.index_of(x, y, grid.origin[2])
            if 0 <= i < grid.nx and 0 <= j < grid.ny:
                rasters.setdefault(attr, np.full((grid.nx, grid.ny), None, dtype=object))[i, j] = code
    return rasters


def _load_models(out: Path, grid: GridSpec):
    index = _columns(out / "models_index.csv")
    names = list(zip(index["name"], index["kind"], index["unit"]))
    cols = _columns(out / "models.csv")
    i, j, k = (np.array(cols[c], dtype=int) for c in ("i", "j", "k"))
    categorical, numeric = {}, {}
    for name, kind, unit in names:
        if kind == "categorical":
            arr = np.full(grid.shape, None, dtype=object)
            arr[i, j, k] = cols[name]
            categorical[name] = arr
        else:
            arr = np.full(grid.shape, np.nan)
            arr[i, j, k] = np.array(cols[name], dtype=float)
            numeric[name] = (arr, unit)
    return categorical, numeric


def stage_evidence(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Binarize the training element and build binary and classed evidence."""
    space = load_space(out)
    grid = space.grid
    categorical, numeric = _load_models(out, grid)
    try:
        cu, _ = numeric[cfg.training_element]
        with np.errstate(invalid="ignore"):
            training = VolumeMask(grid, space.flags & (cu >= cfg.cutoff))
        check_training(training, space)
    except Exception as exc:
        raise PipelineError("binarize", exc) from exc

    columns: dict[str, np.ndarray] = {"training": training.flags.astype(np.int32)}
    layers = []
    for attr, labels in categorical.items():
        for code in sorted({str(v) for v in labels[space.flags]}):
            name = f"{attr}={code}"
            columns[name] = np.where(space.flags, (labels == code).astype(np.int32), -1)
            layers.append((name, BINARY, ""))

    if "faults" in cfg.paths:
        faults = _fault_mask(cfg, out, space)
        columns["structure=fault"] = np.where(space.flags, faults.flags.astype(np.int32), -1)
        layers.append(("structure=fault", BINARY, ""))
        for radius in cfg.buffer_radii:
            name = f"structure=buffer_{export.fmt(radius).removesuffix('.0')}"
            buf = buffer_mask(faults, radius, space)
            columns[name] = np.where(space.flags, buf.flags.astype(np.int32), -1)
            layers.append((name, BINARY, ""))

    for element in cfg.elements:
        values, _ = numeric[element]
        known = space.flags & np.isfinite(values)
        bounds = decile_classes(values[known], cfg.classes)
        assignment = np.full(grid.shape, -1, dtype=np.int32)
        assignment[known] = class_index(values[known], bounds)
        columns[element] = assignment
        layers.append((element, CLASSED, ";".join(f"{export.fmt(a)}:{export.fmt(b)}" for a, b in bounds)))

    idx = space.indices()
    picked = [columns[name][tuple(idx.T)] for name in columns]
    _write(out / "evidence.csv", ("i", "j", "k", *columns),
           ((int(i), int(j), int(k), *(int(c[n]) for c in picked)) for n, (i, j, k) in enumerate(idx)))
    _write(out / "layers.csv", ("name", "kind", "bounds"), layers)
    return {"training_voxels": training.count, "layers": len(layers)}


def _fault_mask(cfg: PipelineConfig, out: Path, space: VolumeMask) -> VolumeMask:
    grid = space.grid
    cols = _columns(out / "surfaces.csv")
    top = np.full((grid.nx, grid.ny), np.nan)
    bottom = np.full((grid.nx, grid.ny), np.nan)
    ii, jj = np.array(cols["i"], dtype=int), np.array(cols["j"], dtype=int)
    top[ii, jj] = np.array(cols["top"], dtype=float)
    bottom[ii, jj] = np.array(cols["bottom"], dtype=float)
    floor = float(np.nanmin(bottom))
    mask = VolumeMask.empty(grid)
    for trace in read_fault_traces(cfg.paths["faults"]):
        pts = np.asarray(trace.points)
        i, j, _ = grid.index_of(pts[:, 0], pts[:, 1], grid.origin[2])
        z = top[np.clip(i, 0, grid.nx - 1), np.clip(j, 0, grid.ny - 1)]
        mesh = extrude_ribbon(trace, z, depth=float(np.max(z)) - floor)
        mask = mask | voxelize_mesh(mesh, space)
    return mask


def _load_evidence(out: Path, space: VolumeMask):
    grid = space.grid
    meta = _columns(out / "layers.csv")
    names = meta["name"]
    arrays = _voxel_arrays(out / "evidence.csv", grid, ["training", *names], dtype=np.int32, fill=-1)
    training = VolumeMask(grid, arrays.pop("training") == 1)
    specs = []
    for name, kind, bounds in zip(names, meta["kind"], meta["bounds"]):
        b = [tuple(float(v) for v in pair.split(":")) for pair in bounds.split(";")] if bounds else []
        specs.append((name, kind, b, arrays[name]))
    return training, specs


def stage_weights(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Weight tables for every layer and positive-contrast selection."""
    space = load_space(out)
    training, specs = _load_evidence(out, space)
    layers = []
    for name, kind, bounds, assignment in specs:
        if kind == BINARY:
            data = VolumeMask(space.grid, assignment >= 0)
            layers.append(binary_layer(name, VolumeMask(space.grid, assignment == 1), training, space, data))
        else:
            layers.append(weigh_classes(name, assignment, bounds, training, space,
                                        cfg.fuzzy_slope, cfg.fuzzy_center))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        selected = select_evidence(layers, cfg.min_studentized)
    for w in caught:
        log.warning("%s", w.message)
    export.write_weight_tables(out, selected, preamble=(SCHEMA_LINE,))
    _write(out / "warnings.csv", ("message",), [(str(w.message),) for w in caught])
    return {"selected": [l.name for l in selected if l.included]}


def _load_layers(out: Path, space: VolumeMask):
    training, specs = _load_evidence(out, space)
    binary = {row[0]: row for row in zip(*_columns(out / "weights_binary.csv").values())}
    header = _columns(out / "weights_binary.csv").keys()
    bidx = {h: n for n, h in enumerate(header)}
    layers = []
    for name, kind, bounds, assignment in specs:
        if kind == BINARY:
            r = binary[name]
            rec = WeightRecord(float(r[bidx["w_plus"]]), float(r[bidx["w_minus"]]),
                               float(r[bidx["var_w_plus"]]), float(r[bidx["var_w_minus"]]),
                               r[bidx["corrected"]] == "1")
            layers.append(EvidenceLayer(name, BINARY, assignment, rec, r[bidx["included"]] == "1"))
        else:
            cols = _columns(out / f"weights_{export.safe_name(name)}.csv")
            classes = []
            for n in range(len(cols["lower"])):
                f = {c: cols[c][n] for c in cols}
                counts = ContingencyCounts(*(float(f[c]) for c in ("n_em", "n_emb", "n_ebm", "n_ebmb")))
                rec = WeightRecord(float(f["w_plus"]), float(f["w_minus"]), float(f["var_w_plus"]),
                                   float(f["var_w_minus"]), f["corrected"] == "1")
                classes.append(FuzzyClassRecord(float(f["lower"]), float(f["upper"]), counts, rec,
                                                float(f["fuzzy_contrast"]), float(f["fuzzy_weight"]),
                                                float(f["fuzzy_variance"]), f["included"] == "1"))
            layers.append(EvidenceLayer(name, CLASSED, assignment, classes,
                                        any(c.included for c in classes)))
    return training, layers


def stage_integrate(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Posterior and studentized posterior volumes."""
    space = load_space(out)
    training, layers = _load_layers(out, space)
    prior = cfg.prior if cfg.prior is not None else prior_from_training(training, space)
    model = integrate(prior, layers, space)
    fields = {name: getattr(model, name) for name in
              ("logit", "odds", "posterior", "total_variance", "studentized")}
    export.write_model_csv(out / "probability.csv", space, fields, preamble=(SCHEMA_LINE,))
    _write(out / "prior.csv", ("prior", "training_voxels", "space_voxels"),
           [(prior, (training & space).count, space.count)])
    return {"prior": prior, "undefined_studentized": int(model.undefined.sum())}


def _load_probability(out: Path, space: VolumeMask) -> dict[str, ContinuousModel]:
    arrays = _voxel_arrays(out / "probability.csv", space.grid, PROB_FIELDS)
    return {name: ContinuousModel(space, arrays[name]) for name in PROB_FIELDS}


def stage_threshold(cfg: PipelineConfig, out: Path, threads: int = 1):
    """C-V curves, segmented fits and classified anomaly volumes."""
    space = load_space(out)
    models = _load_probability(out, space)
    classes = {}
    result = {}
    for name, model in models.items():
        curve = cv_curve(model, space)
        fit = fit_segments(curve, cfg.segments)
        classes[f"{name}_class"] = classify(model, fit.breakpoints).codes
        _write(out / f"cv_{name}.csv", ("value", "volume"), zip(curve.values, curve.volumes))
        bps = (None,) + fit.breakpoints
        _write(out / f"fit_{name}.csv", ("segment", "start", "breakpoint", "slope", "intercept", "residual"),
               [(n, s, bp, m, c, fit.residual) for n, (s, bp, m, c) in
                enumerate(zip(fit.starts, bps, fit.slopes, fit.intercepts))])
        (out / f"cv_{name}.svg").write_text(
            export.cv_chart_svg(curve, fit, f"C-V chart: {name} probability", name), encoding="utf-8")
        result[name] = fit.breakpoints
    export.write_model_csv(out / "classes.csv", space, classes, preamble=(SCHEMA_LINE,))
    return {"thresholds": result}


def stage_validate(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Prediction-volume curves of both probability models against training."""
    space = load_space(out)
    training, _ = _load_evidence(out, space)
    rows, result = [], {}
    for name, model in _load_probability(out, space).items():
        curves = pv_curves(linear_fuzzify(model), training, space, cfg.pv_thresholds)
        _write(out / f"pv_{name}.csv", ("t", "prediction", "volume"),
               zip(curves.thresholds, curves.prediction, curves.volume))
        (out / f"pv_{name}.svg").write_text(
            export.pv_chart_svg(curves, f"P-V plot: {name} probability"), encoding="utf-8")
        rows.append((name, curves.t_star, curves.p_star, curves.v_star))
        result[name] = (curves.p_star, curves.v_star)
    _write(out / "validation.csv", ("model", "t_star", "p_star", "v_star"), rows)
    return {"intersections": result}


def stage_export(cfg: PipelineConfig, out: Path, threads: int = 1):
    """Legacy VTK volumes and the plain-text run report."""
    space = load_space(out)
    grid = space.grid
    vtk = out / "vtk"
    vtk.mkdir(exist_ok=True)
    export.write_vtk(vtk / "space.vtk", grid, {"active": space.flags.astype(np.int32)}, "modeling space")
    categorical, numeric = _load_models(out, grid)
    fields = {name: arr for name, (arr, _) in numeric.items()}
    for name, labels in categorical.items():
        codes = sorted({str(v) for v in labels[space.flags]})
        lookup = {c: n for n, c in enumerate(codes)}
        fields[name] = np.vectorize(lambda v: lookup.get(v, -1), otypes=[np.int32])(labels)
    export.write_vtk(vtk / "models.vtk", grid, fields, "interpolated models")
    training, layers = _load_layers(out, space)
    ev = {"training": np.where(space.flags, training.flags, -1).astype(np.int32)}
    for layer in layers:
        if layer.included:
            ev[export.safe_name(layer.name)] = layer.assignment
    export.write_vtk(vtk / "evidence.vtk", grid, ev, "selected evidence")
    prob = _voxel_arrays(out / "probability.csv", grid,
                         ("logit", "posterior", "total_variance", "studentized"))
    export.write_vtk(vtk / "probability.vtk", grid, prob, "posterior probability")
    cls = _voxel_arrays(out / "classes.csv", grid, ("posterior_class", "studentized_class"),
                        dtype=np.int32, fill=-1)
    export.write_vtk(vtk / "classes.vtk", grid, cls, "C-V classes")
    report = build_report(out, layers)
    (out / "report.txt").write_text(report, encoding="utf-8")
    write_manifest(out)
    return {"report": str(out / "report.txt")}


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "interp": stage_interp,
    "evidence": stage_evidence,
    "weights": stage_weights,
    "integrate": stage_integrate,
    "threshold": stage_threshold,
    "validate": stage_validate,
    "export": stage_export,
}


def build_report(out: Path, layers) -> str:
    prior = _columns(out / "prior.csv")
    lines = ["voxwofe run report", ""]
    lines.append(f"modeling space voxels: {prior['space_voxels'][0]}")
    lines.append(f"training voxels: {prior['training_voxels'][0]}")
    lines.append(f"prior probability: {float(prior['prior'][0]):.6f}")
    lines.append("")
    lines.append("selected evidence:")
    for layer in layers:
        if layer.kind == BINARY and layer.included:
            r = layer.weights
            lines.append(f"  {layer.name}: C={r.contrast:.4f} C_st={r.studentized_contrast:.4f}")
        elif layer.kind == CLASSED and layer.included:
            kept = [n for n, c in enumerate(layer.classes) if c.included]
            lines.append(f"  {layer.name}: classes {', '.join(str(n + 1) for n in kept)}")
    lines.append("excluded evidence (contrast <= 0):")
    for layer in layers:
        if not layer.included:
            lines.append(f"  {layer.name}")
    lines.append("")
    lines.append("C-V thresholds:")
    for name in PROB_FIELDS:
        bps = [b for b in _columns(out / f"fit_{name}.csv")["breakpoint"] if b]
        lines.append(f"  {name}: {', '.join(f'{float(b):.6g}' for b in bps)}")
    lines.append("")
    lines.append("P-V intersections:")
    val = _columns(out / "validation.csv")
    for name, t, p, v in zip(val["model"], val["t_star"], val["p_star"], val["v_star"]):
        lines.append(f"  {name}: t*={float(t):.4f} prediction={100 * float(p):.1f}% "
                     f"volume={100 * float(v):.1f}%")
    warns = _columns(out / "warnings.csv")["message"] if (out / "warnings.csv").is_file() else []
    if warns:
        lines.append("")
        lines.append("warnings:")
        lines += [f"  {w}" for w in warns]
    return "\n".join(lines) + "\n"


def write_manifest(out: Path):
    files = {}
    for path in sorted(p for p in out.rglob("*") if p.is_file()):
        rel = path.relative_to(out).as_posix()
        if rel in ("manifest.json", "FAILED"):
            continue
        files[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
    doc = {"schema": SCHEMA_VERSION, "files": files}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_stage(name: str, cfg: PipelineConfig, threads: int = 1) -> dict:
    """Run one stage, wrapping any failure in :class:`PipelineError`."""
    if name not in STAGE_FUNCS:
        raise ValueError(f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("stage %s", name)
    try:
        return STAGE_FUNCS[name](cfg, out, threads)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, threads: int = 1) -> dict:
    """Run every stage in order.

    On failure, files written so far are kept and a ``FAILED`` marker
    naming the stage is left in the output directory.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    report = {}
    for name in STAGES:
        try:
            report[name] = run_stage(name, cfg, threads)
        except PipelineError as exc:
            marker.write_text(f"{exc}\n", encoding="utf-8")
            raise
    return report
