"""Stochastic homogenization of chiral micromagnetic composites."""
from .correctors import (
    CorrectorSet,
    EffectiveModel,
    assemble_effective,
    effective_from_table,
    laminate_correctors,
    rve_correctors,
    solve_corrector_rve,
    thom_bruteforce,
)
from .demag import stray_field
from .energy import EnergyBreakdown, energy_eps, energy_hom, eps_energy, hom_energy, thom_density, thom_xi
from .geometry import chi, project_tangent
from .magnetization import Magnetization
from .microstructure import (
    GridField,
    LaminateRealization,
    LaminateSpec,
    Phase,
    PhaseTable,
    birkhoff_average,
    eval_laminate,
    moments,
    sample_checkerboard,
    sample_laminate,
)
from .minimize import MinimizeOptions, MinimizeTrace, fit_helix, minimize_sphere

__version__ = "0.1.0"

__all__ = [
    "CorrectorSet",
    "EffectiveModel",
    "EnergyBreakdown",
    "GridField",
    "LaminateRealization",
    "LaminateSpec",
    "Magnetization",
    "MinimizeOptions",
    "MinimizeTrace",
    "Phase",
    "PhaseTable",
    "assemble_effective",
    "birkhoff_average",
    "chi",
    "effective_from_table",
    "energy_eps",
    "energy_hom",
    "eps_energy",
    "eval_laminate",
    "fit_helix",
    "hom_energy",
    "laminate_correctors",
    "minimize_sphere",
    "moments",
    "project_tangent",
    "rve_correctors",
    "sample_checkerboard",
    "sample_laminate",
    "solve_corrector_rve",
    "stray_field",
    "thom_bruteforce",
    "thom_density",
    "thom_xi",
]
