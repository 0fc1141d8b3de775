import numpy as np
import pytest


def finite_difference_gradient(f, w, h=1e-6):
    """Central-difference gradient of a scalar function."""
    w = np.asarray(w, dtype=np.float64)
    grad = np.empty_like(w)
    for i in range(w.size):
        step = np.zeros_like(w)
        step[i] = h
        grad[i] = (f(w + step) - f(w - step)) / (2.0 * h)
    return grad


@pytest.fixture
def fd_gradient():
    return finite_difference_gradient
