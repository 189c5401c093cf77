import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from voxwofe.errors import DegenerateInputError
from voxwofe.grid import GridSpec, VolumeMask
from voxwofe.interpolate import ContinuousModel
from voxwofe.validate import linear_fuzzify, pv_curves

import oracles


def _model(values):
    values = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    return ContinuousModel(VolumeMask.full(GridSpec((0, 0, 0), len(values), 1, 1)), values)


def _training(flags):
    flags = np.asarray(flags, dtype=bool).reshape(-1, 1, 1)
    return VolumeMask(GridSpec((0, 0, 0), len(flags), 1, 1), flags)


def test_linear_fuzzify_endpoints():
    assert linear_fuzzify(_model([2, 4, 6])).values.ravel().tolist() == [0.0, 0.5, 1.0]


def test_linear_fuzzify_idempotent_on_unit_range(rng):
    v = rng.random(50)
    v[0], v[1] = 0.0, 1.0
    assert np.array_equal(linear_fuzzify(_model(v)).values.ravel(), v)


def test_linear_fuzzify_preserves_ranks(rng):
    v = rng.lognormal(0, 2, 200)
    rho = spearmanr(v, linear_fuzzify(_model(v)).values.ravel()).statistic
    assert rho == pytest.approx(1.0, abs=1e-12)


def test_linear_fuzzify_constant_is_error():
    with pytest.raises(DegenerateInputError):
        linear_fuzzify(_model([3, 3, 3]))


def _perfect(n=1000, n_train=100):
    flags = np.zeros(n, dtype=bool)
    flags[:n_train] = True
    return _model(flags.astype(float)), _training(flags)


def test_perfect_predictor():
    model, training = _perfect()
    pv = pv_curves(model, training, n_thresholds=200)
    assert pv.p_star >= 0.9
    assert abs(pv.p_star + pv.v_star - 1) <= 1 / 200
    assert np.all(pv.prediction >= pv.volume)


def test_curves_match_exhaustive_evaluation(rng):
    v = rng.random(400)
    train = rng.random(400) < 0.15
    pv = pv_curves(_model(v), _training(train), n_thresholds=50)
    p, vol = oracles.pv_eval(list(v), list(train), pv.thresholds.tolist())
    assert pv.prediction.tolist() == p and pv.volume.tolist() == vol
    assert pv.prediction[0] == 1 and pv.volume[0] == 1


def test_intersection_bracketed_by_curves(rng):
    v = rng.random(400)
    pv = pv_curves(_model(v), _training(v > 0.7), n_thresholds=100)
    i = np.searchsorted(pv.thresholds, pv.t_star) - 1
    assert pv.thresholds[i] <= pv.t_star <= pv.thresholds[i + 1]
    assert pv.v_star == pytest.approx(1 - pv.p_star, abs=1e-12)


def test_random_predictor_is_near_diagonal(rng):
    n, k = 20000, 2000
    v = rng.random(n)
    train = np.zeros(n, dtype=bool)
    train[rng.choice(n, k, replace=False)] = True
    pv = pv_curves(_model(v), _training(train), n_thresholds=50)
    # hypergeometric sd of the training fraction above t
    sd = np.sqrt(pv.volume * (1 - pv.volume) * (n - k) / (k * (n - 1)))
    assert np.all(np.abs(pv.prediction - pv.volume) <= 3 * sd + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-50, 50))
def test_linear_rescaling_leaves_curves_unchanged(seed, scale, shift):
    rng = np.random.default_rng(seed)
    v = np.round(rng.random(300), 3)
    v[0], v[1] = 0.0, 1.0
    train = _training(rng.random(300) < 0.2)
    if not train.count:
        return
    a = pv_curves(_model(v), train, n_thresholds=40)
    b = pv_curves(linear_fuzzify(_model(v * scale + shift)), train, n_thresholds=40)
    assert np.array_equal(a.prediction, b.prediction) and np.array_equal(a.volume, b.volume)
    assert a.p_star == pytest.approx(b.p_star, abs=1e-12)


def test_values_outside_unit_range_rejected():
    with pytest.raises(DegenerateInputError):
        pv_curves(_model([0.5, 2.0]), _training([True, False]))


def test_empty_training_rejected():
    with pytest.raises(DegenerateInputError):
        pv_curves(_model([0.5, 0.2]), _training([False, False]))


def test_constant_model_still_has_intersection():
    # P(0) + V(0) = 2 and the step past t = 1 gives 0, so a crossing always exists
    pv = pv_curves(_model([0.0, 0.0, 0.0]), _training([True, False, False]), n_thresholds=5)
    assert abs(pv.p_star + pv.v_star - 1) <= 1 / 5
