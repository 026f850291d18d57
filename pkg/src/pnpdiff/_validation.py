"""Input checks shared by the estimator wrappers."""

import numpy as np
from sklearn.utils import check_array

from .sensing import DenseSensor, SeparableSensor


def check_sensor(sensor):
    if not isinstance(sensor, (SeparableSensor, DenseSensor)):
        raise TypeError(
            f"sensor must be a SeparableSensor or DenseSensor, got {type(sensor).__name__}")
    return sensor


def check_rows(X, n_features, what):
    """Validate a ``(n_samples, n_features)`` float array of finite values."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_features:
        raise ValueError(f"{what} rows have {X.shape[1]} features, expected {n_features}")
    return X


def rows_to_signals(X, sensor):
    """Reshape ``(n_samples, N)`` rows into the sensor's native signal layout."""
    if isinstance(sensor, SeparableSensor):
        return X.reshape((X.shape[0],) + sensor.signal_shape)
    return X


def rows_to_measurements(Y, sensor):
    if isinstance(sensor, SeparableSensor):
        return Y.reshape((Y.shape[0],) + sensor.measurement_shape)
    return Y


def signals_to_rows(xs):
    xs = np.asarray(xs, dtype=np.float64)
    return xs.reshape(xs.shape[0], -1)


def check_unit_interval(value, name, closed_low=True):
    if not (0.0 <= value <= 1.0) or (not closed_low and value == 0.0):
        raise ValueError(f"{name} must lie in {'[' if closed_low else '('}0, 1], got {value}")
    return float(value)
