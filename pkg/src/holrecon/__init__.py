"""Potential reconstruction for -Δu + q u^p = 0 on the unit disk from nonlinear boundary data."""
from .config import ExperimentConfig
from .errors import (
    ConditioningError, ConfigurationError, ConvergenceError, LinearSolveError, ShapeError,
    SolverDivergenceError, StabilityBoundError, TopologyError,
)
from .fem import FESpace, ProblemConfig, newton_solve, solve_forward
from .fourier_op import FourierData, assemble_E, build_frequency_grid, build_pixel_grid
from .harmonics import CalderonPair, make_frequency_point
from .invert import build_regularizer, l2_error, tikhonov_solve, tv_solve
from .measure import EpsilonGrid, NoiseModel, fourier_sample, sweep_frequency
from .mesh import build_disk_mesh
from .potentials import PotentialField, bump, fourier_oracle, ring, star, two_bumps
from .sgdiff import SGConfig, sg_derivative_at

__version__ = "0.1.0"
