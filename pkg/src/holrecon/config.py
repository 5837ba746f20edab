"""Experiment configuration: nested dataclasses with a versioned JSON schema.

Unknown keys are rejected at every level. ``to_json`` is canonical (sorted
keys, repr floats) so load/dump round trips are bit-identical. The SHA-256
of the result-relevant part identifies a run.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .harmonics import MAX_FREQUENCY

SCHEMA_VERSION = 1
RESULT_NEUTRAL = ("output_dir", "workers", "plots")


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "bump"
    params: tuple = (0.0, 0.0, 0.4)


@dataclass(frozen=True)
class ProblemSpec:
    p: int = 2
    data_path: str = "domain"
    newton_rel_tol: float = 1e-8
    newton_max_iter: int = 20


@dataclass(frozen=True)
class MeshSpec:
    radial_resolution: int = 48
    degree: int = 3


@dataclass(frozen=True)
class EpsilonSpec:
    n: int = 33
    lo: float = -1.0
    hi: float = 1.0


@dataclass(frozen=True)
class SGSpec:
    window: int = 25
    degree: int = 4
    deriv_order: int = 2


@dataclass(frozen=True)
class NoiseSpec:
    rho: float = 0.01
    seed: int = 0
    # inversion-only runs: relative level of complex Gaussian noise added to F
    fourier_rho: float = 0.0


@dataclass(frozen=True)
class FrequencySpec:
    n_r: int = 12
    n_theta: int = 8
    r_max: float = 3.0
    half_plane: bool = True
    include_zero: bool = True


@dataclass(frozen=True)
class PixelSpec:
    nx: int = 60
    ny: int = 60
    box: tuple = (-1.0, 1.0, -1.0, 1.0)


@dataclass(frozen=True)
class InversionSpec:
    method: str = "tikhonov"
    lam: float = 1e-6
    ladder: tuple = ()
    tv_beta: float | None = None
    tv_max_iter: int = 100
    tv_tol: float = 1e-5


@dataclass(frozen=True)
class PipelineSpec:
    mode: str = "full"
    data_source: str = "oracle"  # inversion_only: oracle | archive | fourier
    data_file: str = ""
    workers: int = 0  # 0 = all available cores
    output_dir: str = "runs/default"
    plots: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    epsilon: EpsilonSpec = field(default_factory=EpsilonSpec)
    sg: SGSpec = field(default_factory=SGSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    frequency: FrequencySpec = field(default_factory=FrequencySpec)
    pixels: PixelSpec = field(default_factory=PixelSpec)
    inversion: InversionSpec = field(default_factory=InversionSpec)
    pipeline: PipelineSpec = field(default_factory=PipelineSpec)

    def __post_init__(self):
        validate(self)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            sec = getattr(self, f.name)
            out[f.name] = {g.name: _plain(getattr(sec, g.name)) for g in dataclasses.fields(sec)}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def hash(self) -> str:
        """Identity of the experiment; keys that cannot change results are left out."""
        d = self.to_dict()
        for key in RESULT_NEUTRAL:
            d["pipeline"].pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {version}")
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, f in sections.items():
            sec_cls = f.default_factory
            raw = d.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigurationError(f"section {name!r} must be a mapping")
            kwargs[name] = _build_section(sec_cls, raw, name)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def override(self, dotted: dict) -> "ExperimentConfig":
        """Copy with ``{"section.key": value}`` overrides applied."""
        d = self.to_dict()
        for key, value in dotted.items():
            sec, _, name = key.partition(".")
            if sec not in d or not isinstance(d[sec], dict) or name not in d[sec]:
                raise ConfigurationError(f"unknown config key {key!r}")
            d[sec][name] = value
        return ExperimentConfig.from_dict(d)


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _build_section(sec_cls, raw: dict, name: str):
    fields = {f.name: f for f in dataclasses.fields(sec_cls)}
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown keys in [{name}]: {sorted(unknown)}")
    vals = {}
    for key, value in raw.items():
        default = getattr(sec_cls(), key)
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigurationError(f"{name}.{key} must be a list")
            value = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigurationError(f"{name}.{key} must be true or false")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError(f"{name}.{key} must be an integer")
        elif isinstance(default, float) or (default is None and value is not None):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"{name}.{key} must be a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigurationError(f"{name}.{key} must be a string")
        vals[key] = value
    return sec_cls(**vals)


def validate(cfg: ExperimentConfig) -> None:
    from .potentials import PotentialField

    pot = PotentialField(cfg.potential.kind, tuple(cfg.potential.params))
    if pot.sup_norm() > 5:
        raise ConfigurationError("potentials with sup norm above 5 are not supported")
    if cfg.problem.p < 2:
        raise ConfigurationError("p must be >= 2")
    if cfg.problem.data_path not in ("domain", "flux"):
        raise ConfigurationError("problem.data_path must be 'domain' or 'flux'")
    if not cfg.problem.newton_rel_tol > 0:
        raise ConfigurationError("problem.newton_rel_tol must be positive")
    if cfg.mesh.radial_resolution < 4:
        raise ConfigurationError("mesh.radial_resolution must be >= 4")
    if cfg.mesh.degree < 1:
        raise ConfigurationError("mesh.degree must be >= 1")
    if cfg.epsilon.n < 3 or not cfg.epsilon.lo < 0 < cfg.epsilon.hi:
        raise ConfigurationError("epsilon grid needs n >= 3 and lo < 0 < hi")
    if cfg.sg.window > cfg.epsilon.n:
        raise ConfigurationError("sg.window exceeds the number of epsilon samples")
    if cfg.noise.rho < 0 or cfg.noise.fourier_rho < 0:
        raise ConfigurationError("noise levels must be >= 0")
    if cfg.frequency.r_max > MAX_FREQUENCY:
        raise ConfigurationError(f"frequency.r_max exceeds {MAX_FREQUENCY}")
    if cfg.frequency.n_r < 1 or cfg.frequency.n_theta < 1:
        raise ConfigurationError("frequency grid sizes must be >= 1")
    if len(cfg.pixels.box) != 4:
        raise ConfigurationError("pixels.box needs (x_min, x_max, y_min, y_max)")
    if cfg.inversion.method not in ("tikhonov", "tv"):
        raise ConfigurationError("inversion.method must be 'tikhonov' or 'tv'")
    if not cfg.inversion.lam > 0 or any(not lam > 0 for lam in cfg.inversion.ladder):
        raise ConfigurationError("regularization parameters must be positive")
    if cfg.inversion.tv_beta is not None and not cfg.inversion.tv_beta > 0:
        raise ConfigurationError("inversion.tv_beta must be positive")
    if cfg.pipeline.mode not in ("full", "inversion_only"):
        raise ConfigurationError("pipeline.mode must be 'full' or 'inversion_only'")
    if cfg.pipeline.data_source not in ("oracle", "archive", "fourier"):
        raise ConfigurationError("pipeline.data_source must be oracle, archive or fourier")
    if cfg.pipeline.workers < 0:
        raise ConfigurationError("pipeline.workers must be >= 0")
