"""Structure-preserving integration of Lie-Poisson systems through
collective Hamiltonians on symplectic realizations.

A Lie-Poisson system on the dual of a Lie algebra is pulled back through
a momentum map ``J: M -> g*`` to the collective Hamiltonian ``H o J`` on
a symplectic space ``M``, integrated there with a symplectic method
(implicit midpoint, Gauss-Legendre collocation up to order 10, or
leapfrog for partitioned systems), and pushed forward again.  Because
symplectic Runge-Kutta methods conserve quadratic invariants exactly and
the fibers of ``J`` are cut out by such invariants, the induced map on
``g*`` is Poisson and stays on the coadjoint orbit of the initial
condition to roundoff.

The package splits into a catalog of realizations
(:mod:`~liepoisson.realizations`), a catalog of Hamiltonians
(:mod:`~liepoisson.hamiltonians`), the integrators and trajectory driver
(:mod:`~liepoisson.integrators`), conservation and convergence
diagnostics (:mod:`~liepoisson.diagnostics`), a step-halving reference
solver (:mod:`~liepoisson.oracle`), and a declarative experiment runner
(:mod:`~liepoisson.experiments`) exposed through the ``liepoisson``
command line tool (:mod:`~liepoisson.cli`).
"""

from .geometry import (
    ConfigurationError,
    HamiltonianSpec,
    LiePoissonError,
    NamedFunction,
    RangeError,
    Realization,
    StepFailureError,
    collective_gradient,
    collective_vector_field,
    lift,
    make_collective_field,
    reduce,
)
from .hamiltonians import HAMILTONIAN_NAMES, build_hamiltonian
from .integrators import (
    ButcherTableau,
    IntegratorConfig,
    StepResult,
    Trajectory,
    gauss_step,
    gauss_tableau,
    integrate,
    midpoint_step,
    stormer_verlet_step,
)
from .diagnostics import (
    DriftReport,
    OrderStudy,
    OrthantReport,
    casimir_drift,
    convergence_order,
    energy_drift,
    envelope_slope,
    invariant_drift,
    orthant_check,
)
from .oracle import ReferenceSolution, reference_solve
from .realizations import REALIZATION_BUILDERS
from .realizations import build as build_realization

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "LiePoissonError",
    "ConfigurationError",
    "RangeError",
    "StepFailureError",
    "NamedFunction",
    "Realization",
    "HamiltonianSpec",
    "collective_gradient",
    "collective_vector_field",
    "make_collective_field",
    "reduce",
    "lift",
    "build_realization",
    "REALIZATION_BUILDERS",
    "build_hamiltonian",
    "HAMILTONIAN_NAMES",
    "ButcherTableau",
    "IntegratorConfig",
    "StepResult",
    "Trajectory",
    "gauss_tableau",
    "gauss_step",
    "midpoint_step",
    "stormer_verlet_step",
    "integrate",
    "DriftReport",
    "OrderStudy",
    "OrthantReport",
    "casimir_drift",
    "invariant_drift",
    "energy_drift",
    "envelope_slope",
    "convergence_order",
    "orthant_check",
    "ReferenceSolution",
    "reference_solve",
]
