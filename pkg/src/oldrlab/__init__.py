"""Pseudo-spectral laboratory for Oldroyd-B-type complex fluids on the periodic torus."""

from oldrlab.config import ExperimentConfig, load_config, preset
from oldrlab.oldroyd import (
    ModelParams,
    OldroydState,
    RelaxationlessState,
    SolverConfig,
    energy_balance_residual,
    run,
)
from oldrlab.spectral import Grid, SpectralField
from oldrlab.stokes import StressField2D, velocity_from_stress

__all__ = [
    "ExperimentConfig",
    "Grid",
    "ModelParams",
    "OldroydState",
    "RelaxationlessState",
    "SolverConfig",
    "SpectralField",
    "StressField2D",
    "energy_balance_residual",
    "load_config",
    "preset",
    "run",
    "velocity_from_stress",
]
__version__ = "0.1.0"
