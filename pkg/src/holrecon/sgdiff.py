"""Savitzky-Golay differentiation as local polynomial least squares.

A degree-``degree`` polynomial g(t) = Σ β_k t^k is fitted to the samples
nearest the evaluation point x0 (t = x - x0), and the r-th derivative
estimate is g^(r)(0) = r! β_r. Because the estimate is linear in the data it
is also a fixed weight vector (an FIR filter) once the abscissae are known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConditioningError, ConfigurationError

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SGConfig:
    window: int = 51
    degree: int = 4
    deriv_order: int = 2

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigurationError(f"window must be a positive odd integer, got {self.window}")
        if self.degree < 0 or self.degree >= self.window:
            raise ConfigurationError("polynomial degree must satisfy 0 <= degree < window")
        if self.deriv_order < 0 or self.deriv_order > self.degree:
            raise ConfigurationError("deriv_order must satisfy 0 <= deriv_order <= degree")

    def validate_for(self, n_samples: int):
        if self.window > n_samples:
            raise ConfigurationError(f"window {self.window} exceeds the {n_samples} available samples")

    def to_dict(self):
        return {"window": self.window, "degree": self.degree, "deriv_order": self.deriv_order}


def window_indices(x, x0: float, window: int) -> np.ndarray:
    """Indices of the ``window`` samples nearest x0, in increasing x order."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(np.abs(x - x0), kind="stable")
    return np.sort(order[:window])


def _weights_for_offsets(t, degree: int, r: int) -> np.ndarray:
    """Row vector w with w·y = r! β_r for the LS fit on offsets t."""
    t = np.asarray(t, dtype=float)
    scale = np.max(np.abs(t))
    if scale == 0:
        raise ConditioningError("degenerate window: all abscissae coincide with x0")
    s = t / scale
    V = np.vander(s, degree + 1, increasing=True)
    Q, R = np.linalg.qr(V)
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"Vandermonde condition number {cond:.3g} too large")
    # β_scaled = R^{-1} Q^T y ; β_r = β_scaled_r / scale^r
    e = np.zeros(degree + 1)
    e[r] = 1.0
    row = np.linalg.solve(R.T, e)  # R^{-T} e_r
    return math.factorial(r) * (Q @ row) / scale**r


def sg_weights(x, x0: float, cfg: SGConfig):
    """Window indices and FIR weights for the r-th derivative at x0."""
    x = np.asarray(x, dtype=float)
    cfg.validate_for(len(x))
    idx = window_indices(x, x0, cfg.window)
    return idx, _weights_for_offsets(x[idx] - x0, cfg.degree, cfg.deriv_order)


def sg_derivative_at(x, y, x0: float, cfg: SGConfig) -> complex:
    """r-th derivative at x0 of the local LS polynomial fit to (x, y).

    Real and imaginary parts are fitted together; the fit is linear so this
    is the same as fitting them separately.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ConfigurationError("x and y must have the same length")
    cfg.validate_for(len(x))
    idx = window_indices(x, x0, cfg.window)
    t = x[idx] - x0
    scale = np.max(np.abs(t))
    if scale == 0:
        raise ConditioningError("degenerate window")
    V = np.vander(t / scale, cfg.degree + 1, increasing=True)
    Q, R = np.linalg.qr(V)
    if np.linalg.cond(R) > MAX_CONDITION:
        raise ConditioningError("Vandermonde too ill-conditioned")
    beta = np.linalg.solve(R, Q.T @ y[idx])
    r = cfg.deriv_order
    val = math.factorial(r) * beta[r] / scale**r
    return complex(val) if np.iscomplexobj(y) else float(val)


@lru_cache(maxsize=64)
def sg_fir_weights(cfg: SGConfig, spacing: float) -> np.ndarray:
    """Centered FIR weights for a uniform grid with sample spacing ``spacing``."""
    m = cfg.window // 2
    t = spacing * np.arange(-m, m + 1)
    w = _weights_for_offsets(t, cfg.degree, cfg.deriv_order)
    w.setflags(write=False)
    return w


def sg_noise_gain(cfg: SGConfig, spacing: float) -> float:
    """ℓ2 norm of the FIR weights: output noise std = gain × input noise std."""
    if spacing <= 0:
        raise ConfigurationError("spacing must be positive")
    return float(np.linalg.norm(sg_fir_weights(cfg, float(spacing))))
