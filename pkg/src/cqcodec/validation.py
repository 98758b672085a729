"""Input validation helpers shared by the DSP and codec layers."""

import numpy as np

SAMPLE_RATE = 16000


def check_signal(x, name="signal", allow_empty=False):
    """Return ``x`` as a finite 1-D float64 array.

    Raises ``ValueError`` with the message ``"empty signal"`` for empty input
    unless ``allow_empty`` is set.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0 and not allow_empty:
        raise ValueError("empty signal")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def check_length(x, n, name="frame"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
    return arr


def check_corpus(X):
    """Normalize estimator input to a list of 1-D signals.

    Accepts a single 1-D array or an iterable of 1-D arrays.
    """
    if isinstance(X, np.ndarray) and X.ndim == 1:
        X = [X]
    signals = [check_signal(x) for x in X]
    if not signals:
        raise ValueError("corpus is empty")
    return signals
