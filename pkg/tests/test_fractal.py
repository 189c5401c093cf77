import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from voxwofe.errors import DegenerateInputError
from voxwofe.fractal import CVCurve, classify, cv_curve, fit_segments
from voxwofe.grid import GridSpec, VolumeMask
from voxwofe.interpolate import ContinuousModel

import oracles


def _model(values):
    values = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    return ContinuousModel(VolumeMask.full(GridSpec((0, 0, 0), len(values), 1, 1)), values)


def test_constant_model_is_one_point():
    c = cv_curve(_model([2.5] * 7))
    assert c.values.tolist() == [2.5] and c.volumes.tolist() == [7]


def test_counting_three_values():
    c = cv_curve(_model([3, 1, 2]))
    assert list(zip(c.values, c.volumes)) == [(1, 3), (2, 2), (3, 1)]


def test_non_positive_values_dropped_and_reported():
    c = cv_curve(_model([0, -1, np.nan, 4, 5]))
    assert c.dropped == 3 and c.volumes.tolist() == [2, 1]
    with pytest.raises(DegenerateInputError):
        cv_curve(_model([0, 0]))


def test_curve_matches_threshold_sweep(rng):
    values = np.round(rng.lognormal(0, 1, 500), 2)
    values[:20] = 0
    c = cv_curve(_model(values))
    assert c.volumes.tolist() == oracles.cv_sweep(values, c.values.tolist())
    assert c.volumes[0] == np.count_nonzero(values > 0)


def test_many_distinct_values_use_log_thresholds(rng):
    values = rng.lognormal(0, 1, 5000)
    c = cv_curve(_model(values), max_distinct=64)
    assert len(c) == 64
    assert c.values[0] == values.min() and c.values[-1] == values.max()
    assert c.volumes.tolist() == oracles.cv_sweep(values, c.values.tolist())


def test_pure_power_law_is_one_segment():
    v = np.geomspace(1, 100, 40)
    fit = fit_segments(CVCurve(v, 3e5 * v ** -1.7), 1)
    assert fit.residual <= 1e-10
    assert fit.slopes[0] == pytest.approx(-1.7, rel=1e-12)
    assert fit.breakpoints == ()


def test_two_regime_break_at_ten(rng):
    v = np.geomspace(1, 100, 61)
    vol = np.where(v < 10, 1e6 * v ** -0.5, 1e6 * 10 ** 1.5 * v ** -2.0)
    fit = fit_segments(CVCurve(v, vol * (1 + 0.01 * rng.standard_normal(61))), 2)
    at = int(np.argmin(np.abs(v - 10)))
    assert abs(fit.starts[1] - at) <= 1


def test_three_segments_in_order(rng):
    curve, breaks = oracles.piecewise_power_law(rng, 3)
    fit = fit_segments(curve, 3)
    assert fit.breakpoints[0] < fit.breakpoints[1]
    assert all(abs(a - b) <= 2 for a, b in zip(fit.starts[1:], breaks))


def test_fit_is_global_optimum(rng):
    for n_segments in (2, 3):
        for _ in range(5):
            x = np.sort(rng.uniform(0, 2, 24))
            y = 5 - np.cumsum(rng.uniform(0, 0.5, 24))
            curve = CVCurve(10 ** x, 10 ** y)
            fit = fit_segments(curve, n_segments)
            sse, starts = oracles.best_split_sse(list(x), list(y), n_segments, 3)
            assert fit.residual == pytest.approx(sse, rel=1e-7, abs=1e-12)
            assert fit.starts == starts


def test_residual_non_increasing_in_segments(rng):
    curve, _ = oracles.piecewise_power_law(rng, 3, n_points=60)
    res = [fit_segments(curve, k).residual for k in range(1, 6)]
    assert all(b <= a + 1e-12 for a, b in zip(res, res[1:]))


def test_fit_needs_enough_points():
    with pytest.raises(DegenerateInputError):
        fit_segments(CVCurve(np.arange(1.0, 6.0), np.arange(5.0, 0.0, -1)), 2)
    with pytest.raises(ValueError):
        fit_segments(CVCurve(np.arange(1.0, 6.0), np.arange(5.0, 0.0, -1)), 0)


def test_segments_are_contiguous_and_exhaustive(rng):
    curve, _ = oracles.piecewise_power_law(rng, 2, n_points=50)
    fit = fit_segments(curve, 4)
    assert fit.starts[0] == 0
    assert all(b - a >= 3 for a, b in zip(fit.starts, fit.starts[1:] + (len(curve),)))
    assert list(fit.breakpoints) == sorted(set(fit.breakpoints))


def test_classify_posterior_thresholds():
    model = _model([0.05, 0.09, 0.12, 0.15, 0.2, 0.23, 0.5])
    labels = classify(model, [0.09, 0.15, 0.23]).labels().ravel().tolist()
    assert labels == ["background", "possible", "possible", "probable", "probable", "certain", "certain"]


def test_classify_studentized_thresholds():
    labels = classify(_model([1.0, 3.8, 4.0, 4.9, 7.2]), [3.8, 4.9]).labels().ravel().tolist()
    assert labels == ["background", "probable", "probable", "certain", "certain"]


def test_classify_without_thresholds():
    assert set(classify(_model([1, 2, 3]), []).labels().ravel()) == {"background"}


def test_classify_rejects_unsorted():
    with pytest.raises(ValueError):
        classify(_model([1, 2]), [2.0, 1.0])


def test_class_count_matches_curve_volume(rng):
    values = np.round(rng.lognormal(0, 1, 300), 1)
    model = _model(values)
    curve = cv_curve(model)
    for n in (3, 17, 40):
        t = curve.values[n]
        above = classify(model, [t]).codes.ravel() == 1
        assert np.count_nonzero(above) == curve.volumes[n]


@settings(max_examples=40)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0, 5))
def test_classify_is_monotone(values, bump):
    t = [1.0, 2.5, 6.0]
    lo = classify(_model(values), t).codes.ravel()
    hi = classify(_model(np.array(values) + bump), t).codes.ravel()
    assert np.all(hi >= lo)
