"""Full and inversion-only experiment runs with provenance-stamped outputs."""
from __future__ import annotations

import json
import multiprocessing as mp
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .fem import FESpace, ProblemConfig
from .fourier_op import FourierData, PixelGrid, assemble_E, build_frequency_grid, build_pixel_grid
from .harmonics import make_frequency_point
from .invert import (
    ReconstructionResult, l2_error, lambda_ladder, relative_l2_error, tikhonov_solve, tv_solve,
)
from .measure import (
    EpsilonGrid, NoiseModel, add_noise, fourier_sample, read_sweep_archive, sweep_sign, write_sweep_archive,
)
from .mesh import build_disk_mesh
from .potentials import PotentialField, fourier_oracle
from .sgdiff import SGConfig

HASH_TAG = "# config_hash: "


class StageError(RuntimeError):
    """Failure inside one pipeline stage; ``stage`` names it for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, Exception) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


# ---------------------------------------------------------------------------
# output directory and provenance
# ---------------------------------------------------------------------------

def prepare_output_dir(cfg: ExperimentConfig) -> Path:
    """Create the run directory; refuse one holding files from another config."""
    out = Path(cfg.pipeline.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for p in sorted(out.iterdir()):
        if p.is_file():
            h = file_config_hash(p)
            if h is not None and h != cfg.hash:
                raise ConfigurationError(f"{p} belongs to config {h}, not {cfg.hash}; use a fresh output directory")
    return out


def file_config_hash(path) -> str | None:
    path = Path(path)
    if path.suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except (ValueError, UnicodeDecodeError):
            return None
        if isinstance(data, dict) and "schema_version" in data:
            try:
                return ExperimentConfig.from_dict(data).hash
            except ConfigurationError:
                return None
        return data.get("config_hash") if isinstance(data, dict) else None
    if path.suffix != ".txt":
        return None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith(HASH_TAG):
                return line[len(HASH_TAG):].strip()
    return None


def _write_json(path, payload: dict, cfg: ExperimentConfig):
    Path(path).write_text(json.dumps({"config_hash": cfg.hash, **payload}, sort_keys=True, indent=2) + "\n")


def write_pixel_values(path, pg: PixelGrid, values, cfg: ExperimentConfig, label: str) -> None:
    """Pixel-grid header, then one ``m n value`` line per kept cell."""
    with open(path, "w") as fh:
        fh.write(f"# holrecon pixel field v1: {label}\n")
        fh.write(f"{HASH_TAG}{cfg.hash}\n")
        fh.write(f"# grid: x_min {pg.x_min!r} y_min {pg.y_min!r} nx {pg.nx} ny {pg.ny} h {pg.h!r}\n")
        fh.write("# columns: m n value\n")
        for (m, n), v in zip(pg.cells, values):
            fh.write(f"{m} {n} {float(v)!r}\n")


def read_pixel_values(path):
    """Returns (grid dict, cells (N,2) int, values (N,))."""
    grid, rows = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# grid: "):
                t = line[8:].split()
                grid = {t[i]: float(t[i + 1]) for i in range(0, len(t), 2)}
            elif not line.startswith("#") and line.strip():
                rows.append(line.split())
    a = np.array(rows, dtype=float).reshape(-1, 3)
    return grid, a[:, :2].astype(int), a[:, 2]


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def potential_of(cfg: ExperimentConfig) -> PotentialField:
    return PotentialField(cfg.potential.kind, tuple(cfg.potential.params))


def grids_of(cfg: ExperimentConfig):
    fs, ps = cfg.frequency, cfg.pixels
    fg = build_frequency_grid(fs.n_r, fs.n_theta, fs.r_max, fs.half_plane, fs.include_zero)
    pg = build_pixel_grid(ps.nx, ps.ny, ps.box)
    return fg, pg


def unique_frequencies(xi: np.ndarray):
    """Distinct rows of ``xi`` (sorted) and the map back to every grid point."""
    uniq, inverse = np.unique(np.asarray(xi, dtype=float), axis=0, return_inverse=True)
    return uniq, inverse.ravel()


_WORKER = {}


def _init_worker(cfg_json: str):
    cfg = ExperimentConfig.from_json(cfg_json)
    mesh = build_disk_mesh(cfg.mesh.radial_resolution)
    _WORKER["space"] = FESpace(mesh, cfg.mesh.degree)
    _WORKER["problem"] = ProblemConfig(cfg.problem.p, potential_of(cfg), cfg.problem.newton_rel_tol, cfg.problem.newton_max_iter)
    _WORKER["eps"] = EpsilonGrid.uniform(cfg.epsilon.n, cfg.epsilon.lo, cfg.epsilon.hi).values
    _WORKER["path"] = cfg.problem.data_path


def _sweep_task(task):
    xi, sign = task
    fp = make_frequency_point(xi)
    return sweep_sign(fp, sign, _WORKER["eps"], _WORKER["space"], _WORKER["problem"], _WORKER["path"])


def _worker_count(cfg):
    return cfg.pipeline.workers or os.cpu_count() or 1


def measure_sweeps(cfg: ExperimentConfig, xi_unique: np.ndarray):
    """Clean (+, -) sweeps for each distinct frequency, in the order of ``xi_unique``."""
    tasks = [(tuple(map(float, x)), s) for x in xi_unique for s in (+1, -1)]
    workers = min(_worker_count(cfg), len(tasks))
    if workers <= 1:
        _init_worker(cfg.to_json())
        results = [_sweep_task(t) for t in tasks]
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        with ctx.Pool(workers, initializer=_init_worker, initargs=(cfg.to_json(),)) as pool:
            results = pool.map(_sweep_task, tasks, chunksize=1)
    return [(results[2 * i], results[2 * i + 1]) for i in range(len(xi_unique))]


def noisy_sweeps(cfg: ExperimentConfig, pairs):
    noise = NoiseModel(cfg.noise.rho, cfg.noise.seed)
    return [(add_noise(p, noise, key=(i, 0)), add_noise(m, noise, key=(i, 1))) for i, (p, m) in enumerate(pairs)]


def fourier_from_sweeps(cfg: ExperimentConfig, pairs, xi_unique, inverse, xi_full) -> FourierData:
    sg = SGConfig(cfg.sg.window, cfg.sg.degree, cfg.sg.deriv_order)
    vals = np.array([fourier_sample(p, m, sg) for p, m in pairs])
    return FourierData(xi_full, vals[inverse])


def add_fourier_noise(F: FourierData, rho: float, seed: int) -> FourierData:
    """F + σ (g1 + i g2) with σ = ρ·max|F|, drawn from its own random stream."""
    if rho == 0:
        return FourierData(F.xi.copy(), F.values.copy())
    rng = NoiseModel(rho, seed).generator(key=(1 << 20,))
    g = rng.standard_normal((2, len(F.values)))
    sigma = rho * float(np.max(np.abs(F.values)))
    return FourierData(F.xi.copy(), F.values + sigma * (g[0] + 1j * g[1]))


def invert(cfg: ExperimentConfig, op, F: FourierData, lam: float | None = None) -> ReconstructionResult:
    inv = cfg.inversion
    lam = inv.lam if lam is None else lam
    if inv.method == "tikhonov":
        return tikhonov_solve(op, F, lam)
    return tv_solve(op, F, lam, beta=inv.tv_beta, max_iter=inv.tv_max_iter, tol=inv.tv_tol)


def reconstruction_metrics(res: ReconstructionResult, pot: PotentialField, pg: PixelGrid) -> dict:
    truth = pot(pg.centers)
    out = {
        "l2_error": l2_error(res, truth, pg),
        "argmax": [float(c) for c in pg.centers[int(np.argmax(res.q_pixels))]],
    }
    out["relative_l2_error"] = relative_l2_error(res, truth, pg) if np.any(truth) else None
    return out


def _tripanel(path, pg, truth, rec):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    try:
        fig, ax = plt.subplots(1, 3, figsize=(12, 3.8))
        ext = (pg.x_min, pg.x_min + pg.nx * pg.h, pg.y_min, pg.y_min + pg.ny * pg.h)
        for a, data, title in zip(ax, (truth, rec, rec - truth), ("truth", "reconstruction", "difference")):
            im = a.imshow(pg.to_image(data), origin="lower", extent=ext, cmap="viridis")
            a.set_title(title)
            fig.colorbar(im, ax=a, shrink=0.8)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
    except Exception:  # plots never gate a run
        pass


@dataclass
class RunOutcome:
    directory: Path
    fourier: FourierData
    result: ReconstructionResult
    summary: dict


def _finish(cfg, out, pg, op, F, extra) -> RunOutcome:
    pot = potential_of(cfg)
    with _Stage("inversion"):
        res = invert(cfg, op, F)
    with _Stage("output"):
        truth = pot(pg.centers)
        metrics = reconstruction_metrics(res, pot, pg)
        F.write(out / "fourier.txt", {"config_hash": cfg.hash})
        write_pixel_values(out / "reconstruction.txt", pg, res.q_pixels, cfg, "reconstruction")
        write_pixel_values(out / "ground_truth.txt", pg, truth, cfg, "ground truth")
        _write_json(out / "metadata.json", {**res.metadata(), **metrics}, cfg)
        summary = {"mode": cfg.pipeline.mode, "operator_shape": list(op.shape), **extra, **metrics, "method": res.method, "lambda": res.lam}
        _write_json(out / "summary.json", summary, cfg)
        if cfg.pipeline.plots:
            _tripanel(out / "tripanel.png", pg, truth, res.q_pixels)
    return RunOutcome(out, F, res, summary)


def run_full(cfg: ExperimentConfig) -> RunOutcome:
    """mesh → sweeps → noise → SG → F → inversion → metrics, written to the run directory."""
    with _Stage("config"):
        out = prepare_output_dir(cfg)
        cfg.save(out / "config.json")
        fg, pg = grids_of(cfg)
        xi_unique, inverse = unique_frequencies(fg.xi)
    with _Stage("forward"):
        clean = measure_sweeps(cfg, xi_unique)
    with _Stage("measurement"):
        pairs = noisy_sweeps(cfg, clean)
        write_sweep_archive(out / "sweeps.txt", [s for pair in pairs for s in pair], {"config_hash": cfg.hash})
        F = fourier_from_sweeps(cfg, pairs, xi_unique, inverse, fg.xi)
    with _Stage("operator"):
        op = assemble_E(pg, fg)
    extra = {
        "unique_frequencies": int(len(xi_unique)),
        "forward_solves": int(sum(int(np.sum(s.eps != 0)) for pair in clean for s in pair)),
        "failed_solves": int(sum(int(s.failed.sum()) for pair in clean for s in pair)),
        "max_newton_iterations": int(max(int(s.newton_iterations.max()) for pair in clean for s in pair)),
    }
    return _finish(cfg, out, pg, op, F, extra)


def load_fourier_data(cfg: ExperimentConfig, fg) -> FourierData:
    src = cfg.pipeline.data_source
    if src == "oracle":
        return FourierData(fg.xi, fourier_oracle(potential_of(cfg), fg.xi))
    if not cfg.pipeline.data_file:
        raise ConfigurationError(f"data_source {src!r} needs pipeline.data_file")
    if src == "fourier":
        return FourierData.read(cfg.pipeline.data_file)
    sweeps, _ = read_sweep_archive(cfg.pipeline.data_file)
    sg = SGConfig(cfg.sg.window, cfg.sg.degree, cfg.sg.deriv_order)
    by_xi = {}
    for s in sweeps:
        by_xi.setdefault(tuple(s.frequency.xi), {})[s.sign] = s
    xi_unique, inverse = unique_frequencies(fg.xi)
    vals = []
    for x in xi_unique:
        rec = by_xi.get(tuple(map(float, x)))
        if rec is None or set(rec) != {1, -1}:
            raise ConfigurationError(f"archive lacks both sweeps for xi={tuple(x)}")
        vals.append(fourier_sample(rec[1], rec[-1], sg))
    return FourierData(fg.xi, np.array(vals)[inverse])


def run_inversion_only(cfg: ExperimentConfig) -> RunOutcome:
    """Inversion from oracle data (plus optional noise on F), a sweep archive or a Fourier file."""
    with _Stage("config"):
        out = prepare_output_dir(cfg)
        cfg.save(out / "config.json")
        fg, pg = grids_of(cfg)
    with _Stage("data"):
        F = load_fourier_data(cfg, fg)
        if len(F.values) != fg.size or not np.allclose(F.xi, fg.xi):
            raise ConfigurationError("Fourier data do not match the configured frequency grid")
        F = add_fourier_noise(F, cfg.noise.fourier_rho, cfg.noise.seed)
    with _Stage("operator"):
        op = assemble_E(pg, fg)
    return _finish(cfg, out, pg, op, F, {"data_source": cfg.pipeline.data_source})


def run(cfg: ExperimentConfig) -> RunOutcome:
    return run_full(cfg) if cfg.pipeline.mode == "full" else run_inversion_only(cfg)


def sweep_lambda(cfg: ExperimentConfig, lambdas=None):
    """L-curve over ``lambdas`` (default: the config ladder) on the configured data."""
    lambdas = tuple(lambdas if lambdas is not None else cfg.inversion.ladder)
    if not lambdas:
        raise ConfigurationError("no lambda values given")
    with _Stage("config"):
        out = prepare_output_dir(cfg)
        cfg.save(out / "config.json")
        fg, pg = grids_of(cfg)
    with _Stage("data"):
        F = add_fourier_noise(load_fourier_data(cfg, fg), cfg.noise.fourier_rho, cfg.noise.seed)
    with _Stage("operator"):
        op = assemble_E(pg, fg)
    pot = potential_of(cfg)
    inv = cfg.inversion
    kw = {} if inv.method == "tikhonov" else {"beta": inv.tv_beta, "max_iter": inv.tv_max_iter, "tol": inv.tv_tol}
    with _Stage("inversion"):
        rows = lambda_ladder(op, F, sorted(lambdas), inv.method, **kw)
    table = [(lam, resid, reg, l2_error(r, pot, pg)) for lam, resid, reg, r in rows]
    with _Stage("output"):
        with open(out / "lcurve.txt", "w") as fh:
            fh.write("# holrecon lambda ladder v1\n")
            fh.write(f"{HASH_TAG}{cfg.hash}\n")
            fh.write(f"# method: {inv.method}\n# columns: lambda residual regularizer l2_error\n")
            for row in table:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return table
