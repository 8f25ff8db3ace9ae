"""Chebyshev series on an interval, evaluated by Clenshaw's recurrence."""

from __future__ import annotations

import numpy as np


def to_unit(x, domain) -> np.ndarray:
    """Map ``x`` from ``domain = (a, b)`` to ``[-1, 1]``."""
    a, b = domain
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def clenshaw(coeffs, t):
    """Evaluate ``sum_k coeffs[k] T_k(t)`` for ``t`` in ``[-1, 1]``.

    ``coeffs`` may carry trailing axes (several series evaluated at once);
    the result has shape ``t.shape + coeffs.shape[1:]``.
    """
    c = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    tt = t.reshape(t.shape + (1,) * (c.ndim - 1))
    b1 = np.zeros(t.shape + c.shape[1:])
    b2 = np.zeros_like(b1)
    for k in range(len(c) - 1, 0, -1):
        b1, b2 = 2.0 * tt * b1 - b2 + c[k], b1
    return tt * b1 - b2 + c[0]


def basis(t, degree: int) -> np.ndarray:
    """Matrix ``[T_0(t), ..., T_degree(t)]`` of shape ``(len(t), degree + 1)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((len(t), degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = t
    for k in range(2, degree + 1):
        out[:, k] = 2.0 * t * out[:, k - 1] - out[:, k - 2]
    return out


def derivative(coeffs, domain) -> np.ndarray:
    """Coefficients of the derivative with respect to the raw variable."""
    c = np.asarray(coeffs, dtype=float)
    a, b = domain
    if len(c) == 1:
        return np.zeros_like(c)
    return np.polynomial.chebyshev.chebder(c, axis=0) * (2.0 / (b - a))
