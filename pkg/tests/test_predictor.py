import itertools

import numpy as np
import pytest

from errors import ValidationError
from predictor import (KalmanForecaster, KalmanState, OracleForecaster, ReactiveForecaster,
                       default_noise, kf_init, kf_step, predict_capacity, prediction_accuracy)


def _run(state, measurements):
    predictions = []
    for z in measurements:
        state, prediction = kf_step(state, z)
        predictions.append(prediction)
    return state, predictions


def test_init_creates_an_empty_state():
    state = kf_init(0.01, 1.0)
    assert not state.initialized
    assert state.q == 0.01 and state.r_noise == 1.0


@pytest.mark.parametrize('q, r_noise', [(0, 1), (1, -1), (-0.5, 2)])
def test_init_rejects_nonpositive_variances(q, r_noise):
    with pytest.raises(ValidationError):
        kf_init(q, r_noise)


def test_first_measurement_seeds_the_state():
    state, prediction = kf_step(kf_init(0.5, 2.0), 7)
    assert state.initialized
    assert state.x_hat == prediction == 7.0
    assert state.p_cov == 2.0
    assert state.last_gain is None


def test_update_equations():
    state = KalmanState(x_hat=0.0, p_cov=1.0, q=0.0, r_noise=1.0, initialized=True)
    updated, prediction = kf_step(state, 2)
    assert updated.last_gain == 0.5
    assert updated.x_hat == prediction == 1.0
    assert updated.p_cov == 0.5


def test_kf_step_is_pure():
    state = KalmanState(x_hat=3.0, p_cov=1.0, q=0.1, r_noise=1.0, initialized=True)
    kf_step(state, 10)
    assert state.x_hat == 3.0


def test_negative_measurement_is_rejected():
    with pytest.raises(ValidationError):
        kf_step(kf_init(1, 1), -1)


def test_constant_input_is_a_fixed_point():
    _, predictions = _run(kf_init(0.3, 2.0), [5] * 200)
    assert all(p == 5.0 for p in predictions)


def test_constant_input_converges():
    _, predictions = _run(kf_init(0.01, 1.0), [5] * 50)
    assert abs(predictions[-1] - 5) < 1e-6


def test_estimate_tracks_a_level_shift():
    _, predictions = _run(kf_init(0.05, 1.0), [5] * 20 + [12] * 300)
    assert abs(predictions[-1] - 12) < 1e-6


def test_gain_stays_strictly_between_zero_and_one(rng):
    for _ in range(20):
        q = float(10 ** rng.uniform(-4, 2))
        r_noise = float(10 ** rng.uniform(-2, 3))
        state = kf_init(q, r_noise)
        for z in rng.integers(0, 100, size=300):
            state, _ = kf_step(state, int(z))
            if state.last_gain is not None:
                assert 0.0 < state.last_gain < 1.0
            assert state.p_cov >= 0.0


def test_predictions_are_shift_equivariant(rng):
    for _ in range(20):
        q, r_noise = float(rng.uniform(0.01, 5)), float(rng.uniform(0.1, 10))
        trace = rng.integers(0, 100, size=500).astype(float)
        shift = float(rng.uniform(0, 50))
        _, base = _run(kf_init(q, r_noise), trace)
        _, shifted = _run(kf_init(q, r_noise), trace + shift)
        assert np.allclose(np.array(shifted) - np.array(base), shift, rtol=0, atol=1e-9)


def _prior_variances(q, r_noise, steps):
    state, _ = kf_step(kf_init(q, r_noise), 0.0)
    priors = [state.p_cov + q]
    for _ in range(steps):
        state, _ = kf_step(state, 0.0)
        priors.append(state.p_cov + q)
    return np.array(priors)


LEVELS = [1e-6, 1e-3, 1.0, 1e3, 1e6]
# Covered for q / r_noise >= 1e-4; smaller ratios converge too slowly for 10^4 steps
NOISE_PAIRS = [(q, r) for q, r in itertools.product(LEVELS, LEVELS) if q / r >= 1e-4]


@pytest.mark.parametrize('q, r_noise', NOISE_PAIRS)
def test_prior_variance_settles_within_ten_thousand_steps(q, r_noise):
    steps = np.abs(np.diff(_prior_variances(q, r_noise, 10_000)))
    assert (steps < 1e-9).any()


@pytest.mark.parametrize('q, r_noise', NOISE_PAIRS)
def test_prior_variance_reaches_the_riccati_fixed_point(q, r_noise):
    priors = _prior_variances(q, r_noise, 10_000)
    # relative steps shrink geometrically; stop once they are at rounding level
    relative = np.abs(np.diff(priors)) / priors[1:]
    settled = int(np.argmax(relative < 1e-13)) + 1
    assert relative[settled - 1] < 1e-13
    # fixed point of P = (P r / (P + r)) + q
    expected = (q + np.sqrt(q * q + 4 * q * r_noise)) / 2
    assert priors[settled] == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize('x_hat, headroom, expected', [
    (11.2, 1.0, 12),
    (-0.3, 1.0, 0),
    (10.0, 1.1, 11),
    (9.0, 1.0, 9),
    (5 + 5e-10, 1.0, 6),
    (5 + 1e-6, 1.0, 6),
    (1e6, 1.1, 1_100_000),
])
def test_predict_capacity(x_hat, headroom, expected):
    state = KalmanState(x_hat=x_hat, p_cov=1.0, q=0.1, r_noise=1.0, initialized=True)
    assert predict_capacity(state, headroom) == expected


def test_predict_capacity_needs_a_measurement():
    with pytest.raises(ValidationError):
        predict_capacity(kf_init(1, 1))


def test_predict_capacity_rejects_headroom_below_one():
    state = KalmanState(x_hat=5.0, initialized=True)
    with pytest.raises(ValidationError):
        predict_capacity(state, 0.9)


def test_default_noise_from_trace_head():
    q, r_noise = default_noise([2, 4] * 10 + [100] * 50)
    assert r_noise == pytest.approx(1.0)
    assert q == pytest.approx(0.05)

    q, r_noise = default_noise([0, 4] * 10)
    assert r_noise == pytest.approx(4.0)
    assert q == pytest.approx(0.2)


def test_default_noise_flat_trace_falls_back():
    assert default_noise([7] * 30) == (0.05, 1.0)


def test_prediction_accuracy():
    accuracy = prediction_accuracy([10, 20, 0], [12, 18, 1])
    assert accuracy['mae'] == pytest.approx(5 / 3)
    assert accuracy['rmse'] == pytest.approx(np.sqrt(9 / 3))
    assert accuracy['mape'] == pytest.approx((0.2 + 0.1) / 2)
    assert prediction_accuracy([], [])['mae'] is None


def test_forecasters():
    samples = [4, 8, 6]
    oracle = OracleForecaster(samples)
    assert [oracle.forecast(t, z) for t, z in enumerate(samples)] == [8, 6, 6]

    reactive = ReactiveForecaster()
    assert [reactive.forecast(t, z) for t, z in enumerate(samples)] == [4, 8, 6]

    kalman = KalmanForecaster(0.05, 1.0, headroom=1.0)
    assert kalman.forecast(0, 4) == 4
    assert kalman.forecast(1, 8) > 4
