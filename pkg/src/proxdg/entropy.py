"""Obstacle-anchored Legendre entropies.

Both entropies are written in terms of the gap ``y = u - phi`` and the latent
variable ``psi``.  The observable is ``grad_conj(phi, psi) = phi + F(psi)``
with ``F = exp`` (Shannon) or ``F = softplus`` (Softplus), so it always sits
strictly above the obstacle for finite ``psi``.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import numpy as np
from scipy import special

__all__ = ["LegendreEntropy", "SHANNON", "SOFTPLUS", "get_entropy", "dilog", "EntropyDomainError"]


class EntropyDomainError(ValueError):
    """Raised when an argument lies outside the domain of the entropy."""


def dilog(z):
    """Real dilogarithm ``Li2(z)`` for ``z <= 1``."""
    z = np.asarray(z, dtype=float)
    if np.any(z > 1.0):
        raise EntropyDomainError("real dilogarithm needs z <= 1")
    # scipy's spence(x) is Li2(1 - x)
    return special.spence(1.0 - z)


def _check_gap(y, name):
    if np.any(~(y > 0)):
        raise EntropyDomainError(f"{name} must lie strictly above the obstacle")


class LegendreEntropy:
    """Entropy pair ``(R, R*)`` of kind ``"shannon"`` or ``"softplus"``."""

    def __init__(self, kind="shannon"):
        kind = str(kind).lower()
        if kind not in ("shannon", "softplus"):
            raise ValueError(f"unknown entropy {kind!r}; choose 'shannon' or 'softplus'")
        self.kind = kind

    def __repr__(self):
        return f"LegendreEntropy({self.kind!r})"

    # latent side -------------------------------------------------------
    def gap(self, psi):
        """``F(psi) = grad_conj(phi, psi) - phi``, strictly positive."""
        psi = np.asarray(psi, dtype=float)
        if self.kind == "shannon":
            return np.exp(psi)
        return np.logaddexp(0.0, psi)

    def grad_conj(self, phi, psi):
        return np.asarray(phi, dtype=float) + self.gap(psi)

    def hess_conj(self, phi, psi):
        psi = np.asarray(psi, dtype=float) + 0.0 * np.asarray(phi, dtype=float)
        if self.kind == "shannon":
            return np.exp(psi)
        return special.expit(psi)

    def conj(self, phi, psi):
        """``R*(psi)``; the softplus branch needs the dilogarithm."""
        phi = np.asarray(phi, dtype=float)
        psi = np.asarray(psi, dtype=float)
        if self.kind == "shannon":
            return np.exp(psi) + phi * psi
        return phi * psi - dilog(-np.exp(psi))

    # observable side ---------------------------------------------------
    def grad(self, phi, u):
        """``grad R(u)``, the inverse of :meth:`grad_conj`."""
        y = np.asarray(u, dtype=float) - np.asarray(phi, dtype=float)
        _check_gap(y, "u")
        if self.kind == "shannon":
            return np.log(y)
        return y + np.log(-np.expm1(-y))

    def value(self, phi, u):
        """``R(u)``; ``u = phi`` is allowed and gives 0."""
        y = np.asarray(u, dtype=float) - np.asarray(phi, dtype=float)
        if np.any(y < 0):
            raise EntropyDomainError("u must not lie below the obstacle")
        if self.kind == "shannon":
            return special.xlogy(y, y) - y
        with np.errstate(divide="ignore"):
            psi = np.where(y > 0, y + np.log(-np.expm1(-np.where(y > 0, y, 1.0))), 0.0)
        return np.where(y > 0, psi * y, 0.0) + dilog(-np.expm1(y))

    def bregman(self, phi, a, b):
        """``D(a, b) = R(a) - R(b) - grad R(b) (a - b)`` with ``a >= phi`` and ``b > phi``."""
        phi = np.asarray(phi, dtype=float)
        ya = np.asarray(a, dtype=float) - phi
        yb = np.asarray(b, dtype=float) - phi
        _check_gap(yb, "b")
        if np.any(ya < 0):
            raise EntropyDomainError("a must not lie below the obstacle")
        if self.kind == "shannon":
            return special.xlogy(ya, ya / yb) - ya + yb
        return self.value(phi, a) - self.value(phi, b) - self.grad(phi, b) * (ya - yb)


SHANNON = LegendreEntropy("shannon")
SOFTPLUS = LegendreEntropy("softplus")


def get_entropy(kind):
    if isinstance(kind, LegendreEntropy):
        return kind
    return LegendreEntropy(kind)
