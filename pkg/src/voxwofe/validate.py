"""Prediction-volume curves for prospectivity models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, NoIntersectionError
from .grid import VolumeMask
from .interpolate import ContinuousModel


@dataclass(frozen=True, eq=False)
class PVCurves:
    """Prediction rate and occupied volume against a threshold sweep.

    ``prediction[i]`` is the fraction of training voxels with value at or
    above ``thresholds[i]``; ``volume[i]`` the same fraction of all
    evaluated voxels. The intersection is where prediction equals
    ``1 - volume``.
    """

    thresholds: np.ndarray = field(repr=False)
    prediction: np.ndarray = field(repr=False)
    volume: np.ndarray = field(repr=False)
    t_star: float
    p_star: float
    v_star: float


def linear_fuzzify(model: ContinuousModel) -> ContinuousModel:
    """Rescale active values linearly onto [0, 1]."""
    v = model.values[model.mask.flags]
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise DegenerateInputError("model has no finite values")
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise DegenerateInputError("constant model cannot be rescaled")
    scaled = (model.values - lo) / (hi - lo)
    return ContinuousModel(model.mask, np.clip(scaled, 0.0, 1.0), model.unit)


def pv_curves(prospectivity: ContinuousModel, training: VolumeMask, space: VolumeMask | None = None,
              n_thresholds: int = 200) -> PVCurves:
    """Prediction-volume curves over ``n_thresholds`` evenly spaced values in [0, 1].

    Voxels of ``space`` without a finite prospectivity value are left out.
    The crossing of prediction and ``1 - volume`` is found by linear
    interpolation; when the curves have not crossed by t = 1, one more step
    past 1 (where both fractions are 0) closes the bracket.
    """
    if n_thresholds < 2:
        raise ValueError("need at least two thresholds")
    space = prospectivity.mask if space is None else space
    values = prospectivity.values
    evaluated = space.flags & np.isfinite(values)
    v_all = np.sort(values[evaluated])
    v_train = np.sort(values[evaluated & training.flags])
    if v_train.size == 0:
        raise DegenerateInputError("no training voxels with a prospectivity value")
    if v_all.min() < 0 or v_all.max() > 1:
        raise DegenerateInputError("prospectivity values must lie in [0, 1]; use linear_fuzzify")

    t = np.linspace(0.0, 1.0, n_thresholds)
    prediction = (v_train.size - np.searchsorted(v_train, t, side="left")) / v_train.size
    volume = (v_all.size - np.searchsorted(v_all, t, side="left")) / v_all.size

    tt = np.append(t, 1.0 + (t[1] - t[0]))
    pp = np.append(prediction, 0.0)
    vv = np.append(volume, 0.0)
    gap = pp + vv - 1.0
    crossing = np.flatnonzero((gap[:-1] >= 0) & (gap[1:] <= 0) & (gap[:-1] != gap[1:]))
    exact = np.flatnonzero(gap == 0)
    if crossing.size == 0 and exact.size == 0:
        raise NoIntersectionError("prediction and occupied-volume curves do not cross")
    if exact.size and (crossing.size == 0 or exact[0] <= crossing[0]):
        i = int(exact[0])
        return PVCurves(t, prediction, volume, float(tt[i]), float(pp[i]), float(vv[i]))
    i = int(crossing[0])
    alpha = gap[i] / (gap[i] - gap[i + 1])
    t_star = tt[i] + alpha * (tt[i + 1] - tt[i])
    p_star = pp[i] + alpha * (pp[i + 1] - pp[i])
    v_star = vv[i] + alpha * (vv[i + 1] - vv[i])
    return PVCurves(t, prediction, volume, float(t_star), float(p_star), float(v_star))
