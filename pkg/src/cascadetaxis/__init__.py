"""Finite-volume simulator and verification harness for a forager-scrounger
cascaded-taxis system with nutrient consumption and logistic growth."""

from .grid import FluxField, Grid
from .model import (
    InitialData,
    ModelConfig,
    ModelError,
    ResupplySpec,
    f_eval,
    f_prime,
    resupply_field,
    validate_initial_data,
    validate_resupply,
)
from .stepper import SimState, StepAbort, Trajectory, run, step

__version__ = "0.1.0"

__all__ = [
    "FluxField",
    "Grid",
    "InitialData",
    "ModelConfig",
    "ModelError",
    "ResupplySpec",
    "SimState",
    "StepAbort",
    "Trajectory",
    "f_eval",
    "f_prime",
    "resupply_field",
    "run",
    "step",
    "validate_initial_data",
    "validate_resupply",
]
