"""Quadrature rules on the reference triangle and on facets.

Triangle rules are returned in barycentric coordinates with weights that sum
to one, so ``|T| * sum(w * f(x_q))`` integrates over a physical cell.  Facet
rules live on ``t in [0, 1]`` with weights summing to one.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["triangle_rule", "facet_rule", "legendre"]


def _radon7():
    s = np.sqrt(15.0)
    a, b = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    wa, wb = (155.0 - s) / 1200.0, (155.0 + s) / 1200.0
    pts = [(1 / 3, 1 / 3),
           (a, a), (1 - 2 * a, a), (a, 1 - 2 * a),
           (b, b), (1 - 2 * b, b), (b, 1 - 2 * b)]
    w = [9 / 40, wa, wa, wa, wb, wb, wb]
    return np.array(pts), np.array(w)


def _collapsed_gauss(degree):
    # Duffy map of the unit square onto the triangle; the Jacobian (1 - u)
    # adds one polynomial degree in u
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    weights = (WU * WV * (1.0 - U)).ravel() * 2.0
    return np.column_stack([xi, eta]), weights


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Rule exact for polynomials of total degree ``degree``.

    Returns ``(bary, weights)`` with ``bary`` of shape ``(nq, 3)``.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    if degree <= 1:
        ref, w = np.array([[1 / 3, 1 / 3]]), np.array([1.0])
    elif degree == 2:
        ref = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif degree <= 5:
        ref, w = _radon7()
    else:
        ref, w = _collapsed_gauss(degree)
    bary = np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    bary.setflags(write=False)
    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    return bary, w


@lru_cache(maxsize=None)
def facet_rule(npts: int):
    """Gauss-Legendre points ``t`` on ``[0, 1]`` and weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(npts)
    t, w = 0.5 * (x + 1.0), 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def legendre(r: int, t):
    """Legendre polynomials ``P_0..P_r`` in ``s = 2t - 1``; shape ``(len(t), r + 1)``."""
    s = 2.0 * np.asarray(t, dtype=float) - 1.0
    cols = [np.ones_like(s)]
    if r >= 1:
        cols.append(s)
    for k in range(2, r + 1):
        cols.append(((2 * k - 1) * s * cols[-1] - (k - 1) * cols[-2]) / k)
    return np.stack(cols, axis=-1)
