"""Independent numerical oracles shared across the test suite.

These are deliberately dumb: plain central differences on numpy
functions, with no knowledge of the autodiff tape they are checking.
"""

import numpy as np


def central_difference_gradient(f, x, step=1e-6):
    """Gradient of scalar-valued f at x, one central difference per entry."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] += step
        xm[i] -= step
        flat[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2 * step)
    return grad


def numerical_jacobian(f, x, step=1e-5):
    """Dense Jacobian of vector-valued f at 1-d x via central differences."""
    x = np.asarray(x, dtype=np.float64)
    f0 = np.asarray(f(x))
    jac = np.zeros((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        jac[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * step)
    return jac


def relative_error(actual, reference, floor=1e-3):
    """Max elementwise |actual - reference| / max(|reference|, floor)."""
    actual = np.asarray(actual, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    return float(np.max(np.abs(actual - reference)
                        / np.maximum(np.abs(reference), floor)))
