"""Pixel grid on the disk, polar frequency grid and the forward Fourier matrix E.

For a square cell of side h centred at c, the exact integral of e^{-iξ·x} is

    h² sinc(ξ_x h / 2) sinc(ξ_y h / 2) e^{-i ξ·c},   sinc(t) = sin t / t, sinc(0) = 1,

which covers the cases ξ_x = 0 and/or ξ_y = 0 through sinc(0) = 1.
Pixels are flattened by I = n·N_x + m (restricted to kept cells, renumbered
densely); frequencies by K = k_r·N_θ + k_θ.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError, ShapeError, StabilityBoundError
from .harmonics import MAX_FREQUENCY


def sinc(t):
    """Unnormalized sinc, sin(t)/t with sinc(0) = 1."""
    return np.sinc(np.asarray(t) / np.pi)


@dataclass(frozen=True, eq=False)
class PixelGrid:
    x_min: float
    y_min: float
    nx: int
    ny: int
    h: float
    cells: np.ndarray  # (N', 2) integer (m, n) of kept cells
    centers: np.ndarray  # (N', 2)

    @property
    def n_kept(self) -> int:
        return len(self.cells)

    @property
    def flat_index(self) -> np.ndarray:
        """Row-major index n·N_x + m of each kept cell in the full box."""
        return self.cells[:, 1] * self.nx + self.cells[:, 0]

    def to_image(self, values, fill=np.nan) -> np.ndarray:
        """Scatter kept-pixel values into an (ny, nx) array (row n, column m)."""
        img = np.full((self.ny, self.nx), fill, dtype=np.result_type(values, float))
        img[self.cells[:, 1], self.cells[:, 0]] = values
        return img

    def to_dict(self):
        return {"x_min": self.x_min, "y_min": self.y_min, "nx": self.nx, "ny": self.ny, "h": self.h}


def build_pixel_grid(nx: int, ny: int, box=(-1.0, 1.0, -1.0, 1.0)) -> PixelGrid:
    """Uniform square cells on ``box = (x_min, x_max, y_min, y_max)``; keep centers with |c| < 1."""
    if nx < 2 or ny < 2:
        raise ConfigurationError("need at least 2 cells per direction")
    x_min, x_max, y_min, y_max = map(float, box)
    if x_min > -1 or x_max < 1 or y_min > -1 or y_max < 1:
        raise ConfigurationError("pixel box must contain the closed unit disk")
    h = (x_max - x_min) / nx
    if abs((y_max - y_min) / ny - h) > 1e-12 * h:
        raise ConfigurationError("cells must be square: (x_max-x_min)/nx != (y_max-y_min)/ny")
    n, m = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    m, n = m.ravel(), n.ravel()
    cx = x_min + (m + 0.5) * h
    cy = y_min + (n + 0.5) * h
    keep = cx**2 + cy**2 < 1.0
    cells = np.column_stack([m[keep], n[keep]])
    centers = np.column_stack([cx[keep], cy[keep]])
    return PixelGrid(x_min, y_min, nx, ny, h, cells, centers)


@dataclass(frozen=True, eq=False)
class PolarFrequencyGrid:
    n_r: int
    n_theta: int
    r_max: float
    half_plane: bool
    radii: np.ndarray
    angles: np.ndarray

    @property
    def xi(self) -> np.ndarray:
        """(K, 2) frequencies, K = k_r·N_θ + k_θ."""
        r = np.repeat(self.radii, self.n_theta)
        t = np.tile(self.angles, self.n_r)
        return np.column_stack([r * np.cos(t), r * np.sin(t)])

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    def to_dict(self):
        return {"n_r": self.n_r, "n_theta": self.n_theta, "r_max": self.r_max, "half_plane": self.half_plane}


def build_frequency_grid(n_r: int, n_theta: int, r_max: float, half_plane: bool = True, include_zero: bool = True) -> PolarFrequencyGrid:
    """Polar grid with uniform radii in [0, r_max] and uniform angles.

    ``include_zero`` places the first radius at 0 (the DC component);
    otherwise radii are r_max·(l+1)/n_r.
    """
    if n_r < 1 or n_theta < 1:
        raise ConfigurationError("n_r and n_theta must be >= 1")
    if r_max > MAX_FREQUENCY:
        raise StabilityBoundError(f"r_max = {r_max} exceeds the stability bound {MAX_FREQUENCY}")
    if r_max < 0:
        raise ConfigurationError("r_max must be >= 0")
    if include_zero:
        radii = np.linspace(0.0, r_max, n_r) if n_r > 1 else np.zeros(1)
    else:
        radii = r_max * np.arange(1, n_r + 1) / n_r
    span = np.pi if half_plane else 2 * np.pi
    angles = span * np.arange(n_theta) / n_theta
    return PolarFrequencyGrid(n_r, n_theta, float(r_max), bool(half_plane), radii, angles)


@dataclass(frozen=True, eq=False)
class ForwardFourierOperator:
    matrix: np.ndarray  # (K, N') complex
    pixel_grid: PixelGrid
    xi: np.ndarray  # (K, 2)
    freq_grid: PolarFrequencyGrid | None = None

    @property
    def shape(self):
        return self.matrix.shape


def e_entries(xi, centers, h) -> np.ndarray:
    """Closed-form cell integrals for frequencies ``xi`` (K, 2) and cell ``centers`` (N, 2)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    amp = h * h * sinc(0.5 * xi[:, 0] * h) * sinc(0.5 * xi[:, 1] * h)
    phase = np.outer(xi[:, 0], centers[:, 0]) + np.outer(xi[:, 1], centers[:, 1])
    out = np.exp(-1j * phase)
    out *= amp[:, None]
    return out


def assemble_E(pg: PixelGrid, fg, block: int = 256) -> ForwardFourierOperator:
    """Dense E (K × N'); ``fg`` is a PolarFrequencyGrid or an explicit (K, 2) array."""
    if isinstance(fg, PolarFrequencyGrid):
        xi, grid = fg.xi, fg
    else:
        xi, grid = np.atleast_2d(np.asarray(fg, dtype=float)), None
    E = np.empty((len(xi), pg.n_kept), dtype=complex)
    for s in range(0, len(xi), block):
        E[s : s + block] = e_entries(xi[s : s + block], pg.centers, pg.h)
    return ForwardFourierOperator(E, pg, xi, grid)


def apply_E(op: ForwardFourierOperator, q_pixels) -> np.ndarray:
    q = np.asarray(q_pixels)
    if q.shape != (op.shape[1],):
        raise ShapeError(f"expected {op.shape[1]} pixel values, got {q.shape}")
    return op.matrix @ q


def apply_E_adjoint(op: ForwardFourierOperator, F) -> np.ndarray:
    F = np.asarray(F)
    if F.shape != (op.shape[0],):
        raise ShapeError(f"expected {op.shape[0]} Fourier values, got {F.shape}")
    return op.matrix.conj().T @ F


def apply_E_matrix_free(pg: PixelGrid, xi, q_pixels, block: int = 128) -> np.ndarray:
    """E q without storing E."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    q = np.asarray(q_pixels)
    if q.shape != (pg.n_kept,):
        raise ShapeError("pixel vector length mismatch")
    out = np.empty(len(xi), dtype=complex)
    for s in range(0, len(xi), block):
        out[s : s + block] = e_entries(xi[s : s + block], pg.centers, pg.h) @ q
    return out


def apply_E_adjoint_matrix_free(pg: PixelGrid, xi, F, block: int = 128) -> np.ndarray:
    """E^H F without storing E."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    F = np.asarray(F)
    if F.shape != (len(xi),):
        raise ShapeError("Fourier vector length mismatch")
    out = np.zeros(pg.n_kept, dtype=complex)
    for s in range(0, len(xi), block):
        out += e_entries(xi[s : s + block], pg.centers, pg.h).conj().T @ F[s : s + block]
    return out


def singular_spectrum(op: ForwardFourierOperator, count: int | None = None, dense_limit: float = 2e8) -> np.ndarray:
    """Largest ``count`` singular values of E, non-increasing.

    Direct SVD when the matrix is small; otherwise the square roots of the
    eigenvalues of the K×K Gram matrix E E^H (accurate down to ~1e-8 σ₁).
    """
    K, N = op.shape
    k = min(K, N) if count is None else int(count)
    if k > min(K, N) or k < 1:
        raise ConfigurationError(f"count must be in [1, {min(K, N)}]")
    if K * N <= dense_limit:
        s = la.svdvals(op.matrix)
    else:
        small = op.matrix if K <= N else op.matrix.conj().T
        gram = small @ small.conj().T
        ev = la.eigvalsh(gram)[::-1]
        s = np.sqrt(np.clip(ev, 0.0, None))
    return np.sort(s)[::-1][:k]


# ---------------------------------------------------------------------------
# Fourier data
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class FourierData:
    xi: np.ndarray  # (K, 2)
    values: np.ndarray  # (K,) complex

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.xi),):
            raise ShapeError("one Fourier value per frequency required")

    def write(self, path, header: dict | None = None) -> None:
        with open(path, "w") as fh:
            fh.write("# holrecon fourier data v1\n")
            for k, v in (header or {}).items():
                fh.write(f"# {k}: {v}\n")
            fh.write("# columns: xi_x xi_y re_F im_F\n")
            for (a, b), f in zip(self.xi.tolist(), self.values.tolist()):
                fh.write(f"{a!r} {b!r} {f.real!r} {f.imag!r}\n")

    @classmethod
    def read(cls, path) -> "FourierData":
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                rows.append([float(t) for t in line.split()])
        a = np.array(rows, dtype=float).reshape(-1, 4)
        return cls(a[:, :2], a[:, 2] + 1j * a[:, 3])
