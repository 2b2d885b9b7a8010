"""Random weak Gibbs measures on random interval attractors."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .base import BaseConfig, FiberSequence, FiberStep, mixing_time, sample_fiber_sequence
from .errors import RandGibbsError
from .geometry import attractor_cover, coding_point, cylinder_interval
from .multifractal import (
    SpectrumCurve,
    T_curve,
    bowen_ruelle_t0,
    empirical_lq,
    ld_spectrum,
    legendre,
    level_set_predictions,
    solve_T,
    variational_ratio,
)
from .scenarios import Scenario, load_scenario, scenario_diagnostics
from .symbolic import CylinderWord, birkhoff_sum, enumerate_cylinders
from .thermo import (
    gibbs_cylinder_weights,
    lambda_sequence,
    log_partition_function,
    normalize_potential,
    pressure,
    rpf_apply,
)

__all__ = [
    "BaseConfig",
    "CylinderWord",
    "FiberSequence",
    "FiberStep",
    "RandGibbsError",
    "Scenario",
    "SpectrumCurve",
    "T_curve",
    "attractor_cover",
    "birkhoff_sum",
    "bowen_ruelle_t0",
    "coding_point",
    "cylinder_interval",
    "empirical_lq",
    "enumerate_cylinders",
    "gibbs_cylinder_weights",
    "lambda_sequence",
    "ld_spectrum",
    "legendre",
    "level_set_predictions",
    "load_scenario",
    "log_partition_function",
    "mixing_time",
    "normalize_potential",
    "pressure",
    "rpf_apply",
    "sample_fiber_sequence",
    "scenario_diagnostics",
    "solve_T",
    "variational_ratio",
]
