"""Calderón exponentials and the paired boundary data f± = v1 ± v2.

With ζ ⟂ ξ and |ζ| = |ξ|,

    v1(x) = ½ exp((-ζ - iξ)·x / 2),   v2(x) = ½ exp((ζ - iξ)·x / 2),

are harmonic and v1·v2 = ¼ exp(-iξ·x).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StabilityBoundError

MAX_FREQUENCY = 10.0
MACHINE_EPS = 2.22e-16


@dataclass(frozen=True)
class FrequencyPoint:
    xi: tuple
    zeta: tuple

    @property
    def xi_vec(self) -> np.ndarray:
        return np.array(self.xi, dtype=float)

    @property
    def zeta_vec(self) -> np.ndarray:
        return np.array(self.zeta, dtype=float)


def make_frequency_point(xi, zeta_sign: int = 1) -> FrequencyPoint:
    """Pair ξ with ζ = ξ rotated by +90° (``zeta_sign=-1`` rotates by -90°).

    Raises StabilityBoundError for |ξ| > 10: beyond that, 4 exp(-2|ζ·x|) sinks
    towards machine epsilon on the unit disk and f+ , f- cancel.
    """
    xi = np.asarray(xi, dtype=float).reshape(2)
    norm = float(np.hypot(*xi))
    if norm > MAX_FREQUENCY:
        raise StabilityBoundError(
            f"|xi| = {norm:.3g} exceeds {MAX_FREQUENCY}; "
            "f+ and f- would cancel to below machine precision"
        )
    zeta = zeta_sign * np.array([-xi[1], xi[0]])
    return FrequencyPoint((float(xi[0]), float(xi[1])), (float(zeta[0]), float(zeta[1])))


class CalderonPair:
    """v1, v2 and their boundary combinations for one frequency point.

    All callables take an (n, 2) array of points and return complex (n,) arrays.
    """

    def __init__(self, fp: FrequencyPoint):
        self.fp = fp
        xi, zeta = fp.xi_vec, fp.zeta_vec
        self._a1 = 0.5 * (-zeta - 1j * xi)
        self._a2 = 0.5 * (zeta - 1j * xi)

    def v1(self, pts):
        pts = np.asarray(pts, dtype=float)
        return 0.5 * np.exp(pts @ self._a1)

    def v2(self, pts):
        pts = np.asarray(pts, dtype=float)
        return 0.5 * np.exp(pts @ self._a2)

    def f_plus(self, pts):
        return self.v1(pts) + self.v2(pts)

    def f_minus(self, pts):
        return self.v1(pts) - self.v2(pts)

    def boundary_data(self, sign: int):
        return self.f_plus if sign > 0 else self.f_minus

    def exponents(self):
        """Complex exponent vectors of v1 and v2 (each a ∈ C^2 with a·a = 0)."""
        return self._a1.copy(), self._a2.copy()


def cancellation_margin(fp: FrequencyPoint) -> float:
    """Worst-case relative size 4 exp(-2|ζ|) of (v1+v2)^2 - (v1-v2)^2 on the unit disk."""
    return float(4.0 * np.exp(-2.0 * np.hypot(*fp.zeta)))


def margin_ok(fp: FrequencyPoint) -> bool:
    return cancellation_margin(fp) >= MACHINE_EPS
