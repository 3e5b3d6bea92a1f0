"""Input validation helpers shared by samplers, estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np


def check_outcomes(data, width=None):
    """Coerce outcome data to a finite 2D float array of shape (N, width)."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None] if width in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected 2D outcome array, got shape {arr.shape}")
    if width is not None and arr.shape[1] != width:
        raise ValueError(f"expected {width} column(s), got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("outcomes contain NaN or inf")
    return arr


def check_probes(probes, width=2):
    arr = check_outcomes(probes, width=width)
    if arr.shape[0] == 0:
        raise ValueError("no probes given")
    return arr


def check_positive(name, value):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_count(name, value, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_seed(value):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or not 0 <= value < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {value!r}")
    return int(value)
