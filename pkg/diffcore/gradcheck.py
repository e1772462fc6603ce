"""Finite-difference helpers shared by the test suites and the gradcheck command."""
from typing import Callable

import numpy as np


def central_difference(fn: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """
    Numerical gradient of ``fn()`` with respect to ``array``.

    ``array`` is perturbed in place, one coordinate at a time, and restored
    before returning.

    Args:
        fn: Zero-argument function reading ``array`` and returning a scalar
        array: The float64 array to differentiate against
        h: Step size

    Returns:
        np.ndarray: Gradient with the shape of ``array``
    """
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = float(fn())
        flat[i] = original - h
        minus = float(fn())
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(a, b) -> float:
    """max|a - b| / max(max|a|, max|b|, 1e-8)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return float(np.abs(a - b).max(initial=0.0) / scale)
