"""Test potentials and an independent quadrature oracle for their Fourier transforms.

Fourier convention: q̂(ξ) = ∫_Ω q(x) exp(-i ξ·x) dx.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

KINDS = ("bump", "two_bumps", "ring", "star", "zero")


class OraclePrecisionWarning(UserWarning):
    pass


def bump_profile(r, d):
    """exp(1/((r/d)^2 - 1) + 1) for r < d, else 0; equals 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    s = (r / d) ** 2
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 / (s[inside] - 1.0) + 1.0)
    return out


@dataclass(frozen=True)
class PotentialField:
    """A closed-form potential q on the closed unit disk.

    ``params`` by kind: bump / two_bumps ``(x0, y0, d)``; ring ``(r_in, r_out)``;
    star ``(r0, a, k)``; zero ``()``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        n = {"bump": 3, "two_bumps": 3, "ring": 2, "star": 3, "zero": 0}[self.kind]
        if len(self.params) != n:
            raise ConfigurationError(f"{self.kind} takes {n} parameters")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "star" and self.params[2] != int(self.params[2]):
            raise ConfigurationError("star k must be an integer")

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "bump":
            x0, y0, d = self.params
            return bump_profile(np.hypot(x - x0, y - y0), d)
        if self.kind == "two_bumps":
            x0, y0, d = self.params
            return bump_profile(np.hypot(x - x0, y - y0), d) + 0.5 * bump_profile(
                np.hypot(x + 2 * x0, y + y0), d
            )
        r = np.hypot(x, y)
        if self.kind == "ring":
            r_in, r_out = self.params
            return ((r > r_in) & (r < r_out)).astype(float)
        r0, a, k = self.params
        theta = np.arctan2(y, x)
        return (r < r0 + a * np.cos(k * theta)).astype(float)

    def sup_norm(self) -> float:
        return 1.5 if self.kind == "two_bumps" else (0.0 if self.kind == "zero" else 1.0)

    def components(self):
        """(weight, centered-bump) pairs for the smooth kinds."""
        x0, y0, d = self.params
        if self.kind == "bump":
            return [(1.0, (x0, y0, d))]
        return [(1.0, (x0, y0, d)), (0.5, (-2 * x0, -y0, d))]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d) -> "PotentialField":
        return cls(d["kind"], tuple(d.get("params", ())))


def bump(x0=0.0, y0=0.0, d=0.4) -> PotentialField:
    return PotentialField("bump", (x0, y0, d))


def two_bumps(x0=0.2, y0=0.4, d=0.4) -> PotentialField:
    return PotentialField("two_bumps", (x0, y0, d))


def ring(r_in=0.3, r_out=0.5) -> PotentialField:
    return PotentialField("ring", (r_in, r_out))


def star(r0=0.5, a=0.2, k=5) -> PotentialField:
    return PotentialField("star", (r0, a, k))


def zero() -> PotentialField:
    return PotentialField("zero", ())


def evaluate(potential: PotentialField, x) -> np.ndarray:
    return potential(x)


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------

def _gl(n, a, b):
    g, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * g + 0.5 * (b + a), 0.5 * (b - a) * w


def _bump_ft(xi, x0, y0, d, n):
    """Tensor Gauss-Legendre over the support box of one bump."""
    xs, wx = _gl(n, x0 - d, x0 + d)
    ys, wy = _gl(n, y0 - d, y0 + d)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy) * bump_profile(np.hypot(X - x0, Y - y0), d)
    keep = W != 0
    X, Y, W = X[keep], Y[keep], W[keep]
    out = np.empty(len(xi), dtype=complex)
    for s in range(0, len(xi), 64):
        blk = xi[s : s + 64]
        out[s : s + 64] = np.exp(-1j * (np.outer(blk[:, 0], X) + np.outer(blk[:, 1], Y))) @ W
    return out


def _polar_ft(xi, r_lo, r_hi, n):
    """∫ over {r_lo(θ) < r < r_hi(θ)} by trapezoid in θ and Gauss-Legendre in r."""
    n_theta = 4 * n
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    lo = np.broadcast_to(r_lo(theta), theta.shape)
    hi = np.broadcast_to(r_hi(theta), theta.shape)
    g, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (hi - lo)[:, None] * g[None, :] + 0.5 * (hi + lo)[:, None]
    wr = 0.5 * (hi - lo)[:, None] * w[None, :] * r * (2 * np.pi / n_theta)
    X = (r * np.cos(theta)[:, None]).ravel()
    Y = (r * np.sin(theta)[:, None]).ravel()
    W = wr.ravel()
    out = np.empty(len(xi), dtype=complex)
    for s in range(0, len(xi), 64):
        blk = xi[s : s + 64]
        out[s : s + 64] = np.exp(-1j * (np.outer(blk[:, 0], X) + np.outer(blk[:, 1], Y))) @ W
    return out


def _oracle_once(potential, xi, n):
    kind = potential.kind
    if kind == "zero":
        return np.zeros(len(xi), dtype=complex)
    if kind in ("bump", "two_bumps"):
        return sum(w * _bump_ft(xi, *c, n) for w, c in potential.components())
    if kind == "ring":
        r_in, r_out = potential.params
        return _polar_ft(xi, lambda t: r_in, lambda t: r_out, n)
    r0, a, k = potential.params
    return _polar_ft(xi, lambda t: 0.0 * t, lambda t: r0 + a * np.cos(k * t), n)


def fourier_oracle(potential: PotentialField, xi, order: int = 64):
    """∫_Ω q(x) e^{-iξ·x} dx by quadrature that resolves the potential's structure.

    Smooth kinds use tensor Gauss-Legendre on each bump's support square;
    indicator kinds use polar quadrature with the jump radius resolved
    per angle. ``xi`` may be a single 2-vector or an (K, 2) array. The value
    is checked against the rule at doubled order and an
    :class:`OraclePrecisionWarning` is emitted if it has not converged.
    """
    if order < 8:
        raise ConfigurationError("oracle order must be >= 8")
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi2 = np.atleast_2d(xi)
    smooth = potential.kind in ("bump", "two_bumps", "zero")
    tol = 1e-8 if smooth else 1e-4
    prev = _oracle_once(potential, xi2, order)
    for level in (2, 4):
        cur = _oracle_once(potential, xi2, order * level)
        scale = max(np.max(np.abs(cur)), 1e-300)
        if np.max(np.abs(cur - prev)) <= tol * scale:
            break
        prev = cur
    else:
        warnings.warn(
            f"fourier_oracle for {potential.kind} not converged to {tol:g}", OraclePrecisionWarning
        )
    return cur[0] if single else cur


def sample_on_grid(potential: PotentialField, pixel_grid) -> np.ndarray:
    """Ground-truth values at the kept pixel centers."""
    return potential(pixel_grid.centers)
