"""ε-sweeps of the measurement functional ψ and their conversion to Fourier samples.

For boundary data ε f±, ψ(ε f±) = ∫∂Ω ∂_ν u = ∫_Ω q u^2 (test function 1).
The second ε-derivative at 0 is 2∫ q (v1 ± v2)^2, so

    ½ [ d²/dε² ψ(ε f+) - d²/dε² ψ(ε f-) ](0) = ∫ q e^{-iξ·x} dx = q̂(ξ).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, LinearSolveError, SolverDivergenceError
from .fem import FESpace, ProblemConfig, boundary_flux_psi, domain_integral_psi, harmonic_lift, newton_solve
from .harmonics import CalderonPair, FrequencyPoint
from .sgdiff import SGConfig, sg_derivative_at

DATA_PATHS = ("domain", "flux")
MAX_FAILED_FRACTION = 0.10


@dataclass(frozen=True, eq=False)
class EpsilonGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) < 3:
            raise ConfigurationError("epsilon grid needs at least three points")
        d = np.diff(v)
        if np.any(d <= 0):
            raise ConfigurationError("epsilon grid must be strictly increasing")
        if np.max(np.abs(d - d.mean())) > 1e-12 * abs(d.mean()) * len(v):
            raise ConfigurationError("epsilon grid must be uniform")
        if not (v[0] < 0 < v[-1]):
            raise ConfigurationError("epsilon grid must straddle 0")

    @classmethod
    def uniform(cls, n: int = 64, lo: float = -2.0, hi: float = 2.0) -> "EpsilonGrid":
        return cls(np.linspace(lo, hi, n))

    @property
    def spacing(self) -> float:
        return float((self.values[-1] - self.values[0]) / (len(self.values) - 1))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class NoiseModel:
    rho: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ConfigurationError("noise level rho must be >= 0")

    def generator(self, key=()) -> np.random.Generator:
        """Independent, reproducible stream for one measurement series."""
        return np.random.default_rng(np.random.SeedSequence(self.rng_seed, spawn_key=tuple(key)))


@dataclass
class MeasurementSweep:
    frequency: FrequencyPoint
    sign: int
    eps: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray | None = None
    data_path: str = "domain"
    failed: np.ndarray | None = None
    newton_iterations: np.ndarray | None = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.clean = np.asarray(self.clean, dtype=complex)
        if self.failed is None:
            self.failed = ~np.isfinite(self.clean)
        if self.clean.shape != self.eps.shape:
            raise ConfigurationError("clean data must have one value per epsilon")

    @property
    def data(self) -> np.ndarray:
        return self.clean if self.noisy is None else self.noisy

    @property
    def valid(self) -> np.ndarray:
        return ~self.failed


def _measure(u, q, config, path):
    if path == "domain":
        return domain_integral_psi(u, q, config)
    return boundary_flux_psi(u)


def sweep_sign(fp: FrequencyPoint, sign: int, eps, space: FESpace, config: ProblemConfig, path: str = "domain"):
    """Forward solves for boundary data ε·f± over all ε; returns a MeasurementSweep."""
    if path not in DATA_PATHS:
        raise ConfigurationError(f"data path must be one of {DATA_PATHS}")
    eps = np.asarray(eps, dtype=float)
    pair = CalderonPair(fp)
    ub = pair.boundary_data(sign)(space.dof_coordinates[space.boundary_dofs])
    clean = np.zeros(len(eps), dtype=complex)
    iters = np.zeros(len(eps), dtype=int)
    failed = np.zeros(len(eps), dtype=bool)
    if not np.any(ub):
        return MeasurementSweep(fp, sign, eps, clean, None, path, failed, iters)
    lift = harmonic_lift(space, ub)
    for k, e in enumerate(eps):
        if e == 0.0:
            continue
        try:
            u, report = newton_solve(space, e * lift, config)
        except (SolverDivergenceError, LinearSolveError):
            failed[k] = True
            clean[k] = np.nan
            continue
        clean[k] = _measure(u, config.q_true, config, path)
        iters[k] = report.iterations
    if failed.mean() > MAX_FAILED_FRACTION:
        raise SolverDivergenceError(
            f"{failed.sum()} of {len(eps)} forward solves failed for xi={fp.xi}, sign={sign:+d}"
        )
    return MeasurementSweep(fp, sign, eps, clean, None, path, failed, iters)


def sweep_frequency(fp: FrequencyPoint, grid: EpsilonGrid, space: FESpace, config: ProblemConfig, path: str = "domain"):
    """(sweep for f+, sweep for f-) at one frequency."""
    return (
        sweep_sign(fp, +1, grid.values, space, config, path),
        sweep_sign(fp, -1, grid.values, space, config, path),
    )


def add_noise(sweep: MeasurementSweep, noise: NoiseModel, key=()) -> MeasurementSweep:
    """noisy = clean + σ (g1 + i g2), σ = ρ max|clean| over this sweep.

    ``key`` selects an independent random stream (e.g. frequency index and
    sign) so results do not depend on evaluation order.
    """
    clean = sweep.clean
    valid = sweep.valid
    if noise.rho == 0:
        return replace(sweep, noisy=clean.copy())
    sigma = noise.rho * (np.max(np.abs(clean[valid])) if valid.any() else 0.0)
    rng = noise.generator(key)
    g = rng.standard_normal((2, len(clean)))
    noisy = clean + sigma * (g[0] + 1j * g[1])
    return replace(sweep, noisy=noisy)


def sg_second_derivative(sweep: MeasurementSweep, sg: SGConfig) -> complex:
    v = sweep.valid
    return complex(sg_derivative_at(sweep.eps[v], sweep.data[v], 0.0, sg))


def fourier_sample(sweep_plus: MeasurementSweep, sweep_minus: MeasurementSweep, sg: SGConfig) -> complex:
    """q̂(ξ) ≈ ½ [SG''(I+)(0) - SG''(I-)(0)]."""
    if sweep_plus.frequency != sweep_minus.frequency:
        raise ConfigurationError("sweeps belong to different frequencies")
    if not np.array_equal(sweep_plus.eps, sweep_minus.eps):
        raise ConfigurationError("sweeps use different epsilon grids")
    if sg.deriv_order != 2:
        raise ConfigurationError("fourier_sample needs the second derivative (deriv_order=2)")
    return 0.5 * (sg_second_derivative(sweep_plus, sg) - sg_second_derivative(sweep_minus, sg))


def snr_db(sweep: MeasurementSweep) -> float:
    """10 log10(Σ|clean|^2 / Σ|noisy - clean|^2)."""
    noise = sweep.noisy - sweep.clean
    v = sweep.valid
    return float(10 * np.log10(np.sum(np.abs(sweep.clean[v]) ** 2) / np.sum(np.abs(noise[v]) ** 2)))


# ---------------------------------------------------------------------------
# sweep archive
# ---------------------------------------------------------------------------

ARCHIVE_HEADER = "# holrecon sweep archive v1"


def write_sweep_archive(path, sweeps, extra_header: dict | None = None) -> None:
    """Plain-text archive, one record per (ξ, sign)."""
    with open(path, "w") as fh:
        fh.write(ARCHIVE_HEADER + "\n")
        for k, v in (extra_header or {}).items():
            fh.write(f"# {k}: {v}\n")
        for s in sweeps:
            fh.write("# record\n")
            xi, zeta = [float(v) for v in s.frequency.xi], [float(v) for v in s.frequency.zeta]
            fh.write(f"# xi: {xi[0]!r} {xi[1]!r}\n")
            fh.write(f"# zeta: {zeta[0]!r} {zeta[1]!r}\n")
            fh.write(f"# sign: {s.sign:+d}\n")
            fh.write(f"# data_path: {s.data_path}\n")
            fh.write(f"# n_eps: {len(s.eps)} eps_min: {float(s.eps[0])!r} eps_max: {float(s.eps[-1])!r}\n")
            fh.write("# columns: eps re_clean im_clean re_noisy im_noisy failed\n")
            noisy = s.clean if s.noisy is None else s.noisy
            for e, c, n, f in zip(s.eps.tolist(), np.asarray(s.clean, complex).tolist(), np.asarray(noisy, complex).tolist(), s.failed):
                fh.write(f"{e!r} {c.real!r} {c.imag!r} {n.real!r} {n.imag!r} {int(f)}\n")


def read_sweep_archive(path):
    """Inverse of :func:`write_sweep_archive`; returns (sweeps, header dict)."""
    sweeps, header = [], {}
    rec, rows = None, []

    def flush():
        if rec is not None:
            a = np.array(rows, dtype=float).reshape(-1, 6)
            fp = FrequencyPoint(tuple(rec["xi"]), tuple(rec["zeta"]))
            sweeps.append(
                MeasurementSweep(
                    fp, rec["sign"], a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4],
                    rec["data_path"], a[:, 5].astype(bool),
                )
            )

    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != ARCHIVE_HEADER:
            raise ConfigurationError(f"{path} is not a sweep archive")
        for line in fh:
            line = line.rstrip("\n")
            if line == "# record":
                flush()
                rec, rows = {}, []
            elif line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                if rec is None:
                    header[key] = val
                elif key in ("xi", "zeta"):
                    rec[key] = [float(t) for t in val.split()]
                elif key == "sign":
                    rec[key] = int(val)
                elif key == "data_path":
                    rec[key] = val
            elif line:
                rows.append([float(t) for t in line.split()])
    flush()
    return sweeps, header
