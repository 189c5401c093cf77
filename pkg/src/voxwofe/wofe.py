"""Weights of evidence on voxel masks.

Ordinary weights for binary evidence, fuzzy weights for classed continuous
evidence, their variances, and log-linear integration into posterior and
studentized posterior probability volumes.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateTrainingError, EmptyModelError, ZeroCellError
from .grid import VolumeMask
from .interpolate import ContinuousModel

BINARY = "binary"
CLASSED = "classed"

# Haldane-style correction added to every cell of a table that has a zero.
CONTINUITY = 0.5


class ConditionalIndependenceWarning(UserWarning):
    """Two selected binary layers overlap so much that independence is doubtful."""


@dataclass(frozen=True)
class ContingencyCounts:
    """Voxel counts of the evidence x training 2x2 table (E = evidence, M = mineralized)."""

    n_em: float
    n_emb: float
    n_ebm: float
    n_ebmb: float

    @property
    def n_m(self) -> float:
        return self.n_em + self.n_ebm

    @property
    def n_mb(self) -> float:
        return self.n_emb + self.n_ebmb

    @property
    def n_e(self) -> float:
        return self.n_em + self.n_emb

    @property
    def n_eb(self) -> float:
        return self.n_ebm + self.n_ebmb

    @property
    def total(self) -> float:
        return self.n_m + self.n_mb

    def cells(self) -> dict[str, float]:
        return {"n_em": self.n_em, "n_emb": self.n_emb, "n_ebm": self.n_ebm, "n_ebmb": self.n_ebmb}

    def zero_cell(self) -> str | None:
        for name, value in self.cells().items():
            if value <= 0:
                return name
        return None

    def corrected(self) -> "ContingencyCounts":
        """Copy with :data:`CONTINUITY` added to each cell if any cell is zero."""
        if self.zero_cell() is None:
            return self
        return ContingencyCounts(*(v + CONTINUITY for v in self.cells().values()))

    def likelihoods(self) -> tuple[float, float, float, float]:
        """``P(E|M), P(Ē|M), P(E|M̄), P(Ē|M̄)``."""
        return (self.n_em / self.n_m, self.n_ebm / self.n_m,
                self.n_emb / self.n_mb, self.n_ebmb / self.n_mb)


@dataclass(frozen=True)
class WeightRecord:
    w_plus: float
    w_minus: float
    var_w_plus: float
    var_w_minus: float
    corrected: bool = False

    @property
    def contrast(self) -> float:
        return self.w_plus - self.w_minus

    @property
    def std_contrast(self) -> float:
        return math.sqrt(self.var_w_plus + self.var_w_minus)

    @property
    def studentized_contrast(self) -> float:
        s = self.std_contrast
        return self.contrast / s if s > 0 else math.nan


@dataclass(frozen=True)
class FuzzyClassRecord:
    lower: float
    upper: float
    counts: ContingencyCounts
    weights: WeightRecord
    fuzzy_contrast: float
    fuzzy_weight: float
    fuzzy_variance: float
    included: bool = True

    @property
    def contrast(self) -> float:
        return self.weights.contrast


@dataclass(frozen=True, eq=False)
class EvidenceLayer:
    """One evidential model over the grid.

    ``assignment`` holds, per voxel, 1/0 for inside/outside a binary
    pattern or the class index of a classed layer; -1 marks voxels with no
    data (including everything off the modeling space).
    """

    name: str
    kind: str
    assignment: np.ndarray = field(repr=False)
    weights: WeightRecord | tuple[FuzzyClassRecord, ...]
    included: bool = True

    def __post_init__(self):
        if self.kind not in (BINARY, CLASSED):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        a = np.asarray(self.assignment, dtype=np.int32)
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        if self.kind == CLASSED:
            object.__setattr__(self, "weights", tuple(self.weights))

    @property
    def classes(self) -> tuple[FuzzyClassRecord, ...]:
        if self.kind != CLASSED:
            raise AttributeError("binary layers have no classes")
        return self.weights

    def contributions(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-voxel weight and variance this layer adds to the posterior logit."""
        shape = self.assignment.shape
        w = np.zeros(shape)
        var = np.zeros(shape)
        if not self.included:
            return w, var
        a = self.assignment
        if self.kind == BINARY:
            rec = self.weights
            w[a == 1], var[a == 1] = rec.w_plus, rec.var_w_plus
            w[a == 0], var[a == 0] = rec.w_minus, rec.var_w_minus
            return w, var
        for n, cls in enumerate(self.classes):
            if cls.included:
                sel = a == n
                w[sel], var[sel] = cls.fuzzy_weight, cls.fuzzy_variance
        return w, var


@dataclass(frozen=True, eq=False)
class ProbabilityModel:
    """Posterior volumes; every array is NaN off the modeling space.

    ``studentized`` is also NaN where the total variance is zero (see
    ``undefined``).
    """

    mask: VolumeMask
    prior: float
    logit: np.ndarray = field(repr=False)
    odds: np.ndarray = field(repr=False)
    posterior: np.ndarray = field(repr=False)
    total_variance: np.ndarray = field(repr=False)
    studentized: np.ndarray = field(repr=False)

    @property
    def undefined(self) -> np.ndarray:
        return self.mask.flags & ~np.isfinite(self.studentized)

    def as_model(self, name: str) -> ContinuousModel:
        return ContinuousModel(self.mask, getattr(self, name))


def check_training(training: VolumeMask, space: VolumeMask):
    inside = (training & space).count
    if inside == 0:
        raise DegenerateTrainingError("training mask has no voxels in the modeling space")
    if inside == space.count:
        raise DegenerateTrainingError("training mask fills the whole modeling space")


def count_contingency(evidence: VolumeMask, training: VolumeMask, space: VolumeMask) -> ContingencyCounts:
    """Partition the active voxels of ``space`` by evidence and training membership."""
    check_training(training, space)
    s = space.flags
    e = evidence.flags & s
    m = training.flags & s
    n_em = int(np.count_nonzero(e & m))
    n_e = int(np.count_nonzero(e))
    n_m = int(np.count_nonzero(m))
    n = space.count
    return ContingencyCounts(n_em, n_e - n_em, n_m - n_em, n - n_e - n_m + n_em)


def binary_weights(c: ContingencyCounts) -> WeightRecord:
    """Positive/negative weights and their variances for one 2x2 table.

    Raises :class:`ZeroCellError` naming the first empty cell; use
    :func:`corrected_weights` to apply the continuity correction instead.
    """
    zero = c.zero_cell()
    if zero is not None:
        raise ZeroCellError(zero)
    pe_m, pnot_m, pe_mb, pnot_mb = c.likelihoods()
    return WeightRecord(
        w_plus=math.log(pe_m / pe_mb),
        w_minus=math.log(pnot_m / pnot_mb),
        var_w_plus=1.0 / c.n_em + 1.0 / c.n_emb,
        var_w_minus=1.0 / c.n_ebm + 1.0 / c.n_ebmb,
    )


def corrected_weights(c: ContingencyCounts) -> tuple[WeightRecord, ContingencyCounts]:
    """Weights after the zero-cell correction, with the counts actually used."""
    fixed = c.corrected()
    rec = binary_weights(fixed)
    if fixed is not c:
        rec = replace(rec, corrected=True)
    return rec, fixed


def decile_classes(values, k: int = 10) -> list[tuple[float, float]]:
    """Split values into ``k`` contiguous classes with equal voxel counts.

    Cut points are the sorted values at ranks ``round(n * i / k)``; a class
    runs from its lower bound (inclusive) to the next class's lower bound,
    the last class includes the maximum. Ties at a cut all go to the upper
    class, so class sizes differ by at most the tie-group size.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 classes, got {k}")
    v = np.sort(np.asarray(values, dtype=float).ravel())
    v = v[np.isfinite(v)]
    if len(np.unique(v)) < k:
        raise ValueError(f"{len(np.unique(v))} distinct values cannot form {k} classes")
    n = len(v)
    cuts = [v[int(round(n * i / k))] for i in range(1, k)]
    edges = [v[0]] + cuts + [v[-1]]
    if any(b <= a for a, b in zip(edges[:-1], edges[1:])):
        raise ValueError("tied values leave an empty class; reduce k")
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def class_index(values, bounds: Sequence[tuple[float, float]]) -> np.ndarray:
    """Class of each value under :func:`decile_classes` bounds; -1 for NaN."""
    values = np.asarray(values, dtype=float)
    lowers = np.array([b[0] for b in bounds[1:]])
    out = np.searchsorted(lowers, values, side="right").astype(np.int32)
    out[~np.isfinite(values)] = -1
    return out


def fuzzify_contrasts(contrasts: Sequence[float], slope: float | None = None,
                      center: float | None = None, lo: float = 0.01, hi: float = 0.99) -> list[float]:
    """Logistic map of class contrasts into fuzzy memberships.

    ``mu = clamp(1 / (1 + exp(-slope * (C - center))), lo, hi)``. By default
    ``center`` is the mean contrast and ``slope`` puts the largest contrast
    at ``hi`` before clamping.
    """
    c = np.asarray(contrasts, dtype=float)
    if len(c) < 2:
        raise ValueError("need at least two contrasts")
    m = float(np.mean(c)) if center is None else center
    if slope is None:
        spread = float(np.max(c)) - m
        if spread <= 0:
            return [0.5] * len(c)
        slope = math.log(hi / (1.0 - hi)) / spread
    mu = 1.0 / (1.0 + np.exp(-slope * (c - m)))
    return [float(x) for x in np.clip(mu, lo, hi)]


def fuzzy_weight(c: ContingencyCounts, mu: float) -> float:
    """Fuzzy weight of a class with membership ``mu``.

    Reduces to W+ at ``mu = 1`` and to W- at ``mu = 0``.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"membership must lie in [0, 1], got {mu}")
    if c.n_m <= 0 or c.n_mb <= 0:
        raise ZeroCellError("n_m" if c.n_m <= 0 else "n_mb")
    pe_m, pnot_m, pe_mb, pnot_mb = c.likelihoods()
    num = mu * pe_m + (1.0 - mu) * pnot_m
    den = mu * pe_mb + (1.0 - mu) * pnot_mb
    if den <= 0:
        raise ZeroCellError("n_emb" if mu == 1.0 else "n_ebmb", "fuzzy weight denominator is zero")
    if num <= 0:
        raise ZeroCellError("n_em" if mu == 1.0 else "n_ebm", "fuzzy weight numerator is zero")
    return math.log(num / den)


def prior_variance(p_e: float, p_m: float, p_m_given_e: float, p_m_given_not_e: float) -> float:
    """Variance of the prior probability induced by one evidence pattern."""
    return (p_m_given_e - p_m) ** 2 * p_e + (p_m_given_not_e - p_m) ** 2 * (1.0 - p_e)


def fuzzy_variance(mu: float, p_e: float, prior_terms: tuple[float, float, float]) -> float:
    """Variance attributed to membership ``mu``.

    ``prior_terms`` is ``(P(M), P(M|E), P(M|Ē))``; ``P(Ē)`` is taken as
    ``1 - P(E)``.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"membership must lie in [0, 1], got {mu}")
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"P(E) must lie in (0, 1), got {p_e}")
    p_mu = mu * p_e + (1.0 - mu) * (1.0 - p_e)
    if p_mu <= 0:
        raise ValueError("membership probability is zero")
    return 2.0 * mu * (1.0 - mu) / p_mu * prior_variance(p_e, *prior_terms)


def fuzzy_variance_from_counts(c: ContingencyCounts, mu: float) -> float:
    p_m = c.n_m / c.total
    return fuzzy_variance(mu, c.n_e / c.total, (p_m, c.n_em / c.n_e, c.n_ebm / c.n_eb))


def binary_layer(name: str, evidence: VolumeMask, training: VolumeMask, space: VolumeMask,
                 data: VolumeMask | None = None) -> EvidenceLayer:
    """Binary layer with zero-cell-corrected ordinary weights.

    Weights are counted over ``data`` (voxels where the evidence is known,
    default the whole space); other space voxels count as missing.
    """
    area = space if data is None else data & space
    rec, _ = corrected_weights(count_contingency(evidence, training, area))
    assignment = np.where(area.flags, (evidence.flags & area.flags).astype(np.int32), -1)
    return EvidenceLayer(name, BINARY, assignment, rec)


def classed_layer(name: str, model: ContinuousModel, training: VolumeMask, space: VolumeMask,
                  k: int = 10, slope: float | None = None, center: float | None = None) -> EvidenceLayer:
    """Classed continuous layer with fuzzy weights per equal-count class."""
    values = np.where(space.flags, model.values, np.nan)
    known = np.isfinite(values)
    bounds = decile_classes(values[known], k)
    assignment = np.full(space.grid.shape, -1, dtype=np.int32)
    assignment[known] = class_index(values[known], bounds)
    return weigh_classes(name, assignment, bounds, training, space, slope, center)


def weigh_classes(name: str, assignment: np.ndarray, bounds: Sequence[tuple[float, float]],
                  training: VolumeMask, space: VolumeMask, slope: float | None = None,
                  center: float | None = None) -> EvidenceLayer:
    """Fuzzy weight table for precomputed class assignments (-1 = no data)."""
    assignment = np.where(space.flags, assignment, -1)
    area = VolumeMask(space.grid, assignment >= 0)
    tables = []
    for n in range(len(bounds)):
        rec, used = corrected_weights(
            count_contingency(VolumeMask(space.grid, assignment == n), training, area)
        )
        tables.append((rec, used))
    mus = fuzzify_contrasts([rec.contrast for rec, _ in tables], slope, center)
    classes = tuple(
        FuzzyClassRecord(lo, hi, used, rec, mu, fuzzy_weight(used, mu),
                         fuzzy_variance_from_counts(used, mu))
        for (lo, hi), (rec, used), mu in zip(bounds, tables, mus)
    )
    return EvidenceLayer(name, CLASSED, assignment, classes)


def select_evidence(layers: Sequence[EvidenceLayer], min_studentized: float | None = None) -> list[EvidenceLayer]:
    """Exclude binary layers and classes whose contrast is not positive.

    ``min_studentized`` optionally also requires a minimum studentized
    contrast. A classed layer stays included while any of its classes is.
    """
    def keep(rec: WeightRecord) -> bool:
        if not rec.contrast > 0:
            return False
        return min_studentized is None or rec.studentized_contrast >= min_studentized

    out = []
    for layer in layers:
        if layer.kind == BINARY:
            out.append(replace(layer, included=keep(layer.weights)))
        else:
            classes = tuple(replace(c, included=keep(c.weights)) for c in layer.classes)
            out.append(replace(layer, weights=classes, included=any(c.included for c in classes)))
    if not any(layer.included for layer in out):
        raise EmptyModelError("no evidence layer has a positive contrast")
    _warn_overlaps(out)
    return out


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def _warn_overlaps(layers: Sequence[EvidenceLayer], limit: float = 0.9):
    chosen = [l for l in layers if l.kind == BINARY and l.included]
    for a, b in itertools.combinations(chosen, 2):
        j = jaccard(a.assignment == 1, b.assignment == 1)
        if j > limit:
            warnings.warn(
                f"layers {a.name!r} and {b.name!r} overlap (Jaccard {j:.3f}); "
                "conditional independence is doubtful",
                ConditionalIndependenceWarning,
                stacklevel=3,
            )


def prior_from_training(training: VolumeMask, space: VolumeMask) -> float:
    check_training(training, space)
    return (training & space).count / space.count


def integrate(prior: float, layers: Sequence[EvidenceLayer], space: VolumeMask) -> ProbabilityModel:
    """Combine prior log-odds with every included layer's weights.

    Total variance sums the variance of each weight a voxel receives;
    voxels with zero total variance get an undefined (NaN) studentized value.
    """
    if not 0.0 < prior < 1.0:
        raise ValueError(f"prior must lie in (0, 1), got {prior}")
    shape = space.grid.shape
    logit = np.full(shape, math.log(prior / (1.0 - prior)))
    variance = np.zeros(shape)
    for layer in layers:
        if layer.assignment.shape != shape:
            raise ValueError(f"layer {layer.name!r} does not match the grid")
        w, var = layer.contributions()
        logit += w
        variance += var
    off = ~space.flags
    logit[off] = np.nan
    variance[off] = np.nan
    odds = np.exp(logit)
    posterior = 1.0 / (1.0 + np.exp(-logit))
    with np.errstate(divide="ignore", invalid="ignore"):
        studentized = np.where(variance > 0, posterior / np.sqrt(variance), np.nan)
    return ProbabilityModel(space, prior, logit, odds, posterior, variance, studentized)
