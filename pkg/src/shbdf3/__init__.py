"""Implicit BDF3 / finite-difference solver for the Swift-Hohenberg equation."""

from .bdf import TimeHistory, make_kernels
from .config import RunConfig, StudyConfig, parse_config, parse_study_config
from .grid import GridField, GridSpec
from .simulation import run_simulation
from .solver import Model, SolveConfig

__all__ = [
    "GridField", "GridSpec", "Model", "RunConfig", "SolveConfig", "StudyConfig",
    "TimeHistory", "make_kernels", "parse_config", "parse_study_config", "run_simulation",
]

__version__ = "0.1.0"
