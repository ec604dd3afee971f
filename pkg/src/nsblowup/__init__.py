"""Pseudo-spectral simulator and analysis toolkit for complex-valued
finite-time singularities of the 3-D incompressible flow equations.

The solver integrates the wavevector-space integral form of the equations
on a truncated uniform mesh; the diagnostics, analysis, and theory modules
measure the divergence (energies, marginals, decay rates, critical time,
power laws) and cross-check it against closed-form asymptotics.
"""

__version__ = "0.1.0"

from .grid import GridSpec, SpectralField, make_grid  # noqa: F401
from .initcond import InitialDataSpec, build_initial_field  # noqa: F401
from .solver import RunSchedule, SolverConfig, Stepper, run  # noqa: F401
