"""
Two-level Landau-Zener dynamics with a tunable adiabatic gauge potential.

Modules: ``model`` (Hamiltonian and eigensystem), ``tdse`` (time-dependent
Schrodinger integration), ``ddp`` (complex-time transition estimates),
``field`` (phase field over the complex time plane), ``integrability``
(flatness of commuting operator families) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (
    AgplzError,
    ContinuationError,
    DegeneracyError,
    ParameterCollisionError,
    PathError,
    PathThroughCutError,
    PoleError,
    QuadratureNonConvergence,
    RadiusError,
    StepSizeUnderflow,
)
from .model import AdiabaticParams, ContourPath, eigensystem, hamiltonian
from .tdse import PropagationReport, transition_probability
from .ddp import (
    PhaseBreakdown,
    branch_points,
    dynamical_phase_integral,
    geometric_phase_integral,
    holonomy,
    predict_probability,
)
from .field import FieldGrid, delta_field, level_lines
from .integrability import (
    FlatnessReport,
    corrected_flatness_residual,
    flatness_residual,
    gaudin_family,
)

__all__ = [
    "AdiabaticParams", "AgplzError", "ContinuationError", "ContourPath", "DegeneracyError",
    "FieldGrid", "FlatnessReport", "ParameterCollisionError", "PathError", "PathThroughCutError",
    "PhaseBreakdown", "PoleError", "PropagationReport", "QuadratureNonConvergence", "RadiusError",
    "StepSizeUnderflow", "branch_points", "corrected_flatness_residual", "delta_field",
    "dynamical_phase_integral", "eigensystem", "flatness_residual", "gaudin_family",
    "geometric_phase_integral", "hamiltonian", "holonomy", "level_lines", "predict_probability",
    "transition_probability",
]
