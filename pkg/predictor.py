"""
Predictor Module - Demand Prediction Model
Scalar local-level Kalman filter for one-step-ahead demand prediction,
plus the forecasters the simulator plugs into the planning loop
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace

import numpy as np

from errors import ValidationError

logger = logging.getLogger(__name__)

NOISE_WINDOW = 20       # samples used to derive default noise variances
PROCESS_NOISE_SHARE = 0.05
CEIL_REL_TOLERANCE = 1e-12  # a few ulps of float product error


@dataclass(frozen=True)
class KalmanState:
    """
    Filter state for a random-walk level model

    x_hat: level estimate (demand units); p_cov: its variance;
    q: process-noise variance; r_noise: measurement-noise variance.
    last_gain is the gain used by the most recent update (None before
    the second measurement).
    """
    x_hat: float = 0.0
    p_cov: float = 0.0
    q: float = 1.0
    r_noise: float = 1.0
    initialized: bool = False
    last_gain: float = None


def kf_init(q, r_noise):
    """
    Create an empty filter

    The first measurement seeds x_hat, and p_cov starts at r_noise.

    Args:
        q (float): Process-noise variance, > 0
        r_noise (float): Measurement-noise variance, > 0

    Returns:
        KalmanState: uninitialized state
    """
    if not q > 0:
        raise ValidationError(f"process noise must be positive, got {q}", field='kf_q')
    if not r_noise > 0:
        raise ValidationError(f"measurement noise must be positive, got {r_noise}", field='kf_r')
    return KalmanState(q=float(q), r_noise=float(r_noise))


def kf_step(state, z):
    """
    One predict/update cycle

    How it works:
    1. Predict: x- = x_hat, P- = p_cov + q
    2. Update: K = P- / (P- + r), x_hat' = x- + K (z - x-), p_cov' = (1 - K) P-
    3. The filtered level is also the forecast for the next interval

    Args:
        state (KalmanState): Current state
        z (float): Measured demand, >= 0

    Returns:
        tuple: (new KalmanState, prediction for the next interval)
    """
    if z < 0:
        raise ValidationError(f"measured demand must be nonnegative, got {z}", field='z')

    if not state.initialized:
        seeded = replace(state, x_hat=float(z), p_cov=state.r_noise, initialized=True)
        return seeded, seeded.x_hat

    p_prior = state.p_cov + state.q
    gain = p_prior / (p_prior + state.r_noise)
    x_hat = state.x_hat + gain * (z - state.x_hat)
    updated = replace(state, x_hat=x_hat, p_cov=(1.0 - gain) * p_prior, last_gain=gain)
    return updated, x_hat


def predict_capacity(state, headroom=1.0):
    """
    Predictive capacity r_p = ceil(max(x_hat, 0) * headroom)

    Products within a relative 1e-12 of an integer count as that integer,
    so 10 * 1.1 gives 11 while 5 + 5e-10 still rounds up to 6.
    """
    if not state.initialized:
        raise ValidationError("filter has not seen a measurement yet", field='state')
    if headroom < 1.0:
        raise ValidationError(f"must be at least 1.0, got {headroom}", field='headroom')
    value = max(state.x_hat, 0.0) * headroom
    nearest = round(value)
    if math.isclose(value, nearest, rel_tol=CEIL_REL_TOLERANCE):
        return nearest
    return math.ceil(value)


def default_noise(samples, window=NOISE_WINDOW):
    """
    Default noise variances from the start of a trace

    r = var(first 20 samples), q = 0.05 * r. A flat start (variance 0)
    falls back to r = 1.0, q = 0.05.
    """
    head = np.asarray(samples[:window], dtype=float)
    variance = float(head.var()) if len(head) else 0.0
    if variance <= 0:
        variance = 1.0
    return PROCESS_NOISE_SHARE * variance, variance


def prediction_accuracy(actual, predicted):
    """
    Accuracy of one-step forecasts

    Args:
        actual (list): Realized demand, aligned with predicted
        predicted (list): Forecasts made one interval earlier

    Returns:
        dict: mae, rmse and mape (mape over nonzero actuals, None if there are none)
    """
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if len(actual) == 0:
        return {'mae': None, 'rmse': None, 'mape': None}
    errors = predicted - actual
    nonzero = actual != 0
    mape = float(np.mean(np.abs(errors[nonzero]) / actual[nonzero])) if nonzero.any() else None
    return {
        'mae': round(float(np.mean(np.abs(errors))), 9),
        'rmse': round(float(np.sqrt(np.mean(errors ** 2))), 9),
        'mape': round(mape, 9) if mape is not None else None,
    }


# ---------------------------------------------------------------------------
# Forecasters used by the simulator
# ---------------------------------------------------------------------------

class Forecaster(ABC):
    """Turns the measurement at interval t into r_p for interval t+1"""

    name = 'forecaster'

    @abstractmethod
    def forecast(self, t, r_m):
        """Return predicted capacity-demand (nonnegative int) for interval t+1"""


class KalmanForecaster(Forecaster):
    name = 'kalman'

    def __init__(self, q, r_noise, headroom=1.0):
        self.state = kf_init(q, r_noise)
        self.headroom = headroom

    def forecast(self, t, r_m):
        # Update Prediction Model (r_m), then forecast the next interval
        self.state, _ = kf_step(self.state, r_m)
        return predict_capacity(self.state, self.headroom)


class ReactiveForecaster(Forecaster):
    """Plans for the demand just measured"""
    name = 'reactive'

    def forecast(self, t, r_m):
        return int(r_m)


class OracleForecaster(Forecaster):
    """Knows the next interval's demand exactly"""
    name = 'oracle'

    def __init__(self, samples):
        self.samples = tuple(samples)

    def forecast(self, t, r_m):
        if t + 1 < len(self.samples):
            return int(self.samples[t + 1])
        return int(self.samples[t])
