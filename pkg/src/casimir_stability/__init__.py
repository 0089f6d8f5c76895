"""Casimir energies, forces and stability of sphere collections.

Scattering-theory interaction energies between magnetodielectric spheres in
a uniform medium at imaginary frequency, their forces and displacement
Laplacians (with the trace decomposition that fixes the Laplacian's sign
for same-class materials), a parallel-plate oracle, and a classical
fluctuating-charge analogue.  Units: hbar = c = 1; one arbitrary length
unit sets all dimensions.
"""

from .casimir import (
    Configuration,
    EnergyResult,
    default_l_max,
    energy_T0,
    free_energy_T,
    lifshitz_plates,
    log_det_integrand,
)
from .classical import (
    ClassicalConfig,
    Container,
    McEstimate,
    SampleStream,
    free_energy_quadrature,
    grad_d_hamiltonian,
    hamiltonian,
    laplacian_F_estimator,
    metropolis_run,
)
from .errors import (
    CapabilityError,
    ConvergenceBudgetError,
    GeometryError,
    PrecisionError,
    ToleranceError,
    UnphysicalTruncationError,
    ValidationError,
    ZeroFrequencyError,
)
from .materials import (
    DispersionModel,
    MaterialClass,
    Medium,
    classify,
    eval_epsilon,
    eval_mu,
)
from .scattering import (
    SphereObject,
    TMatrix,
    definiteness,
    fresnel_reflection,
    mie_tmatrix,
)
from .stability import (
    EquilibriumResult,
    StabilityReport,
    find_axial_equilibrium,
    force,
    laplacian_decomposition,
    laplacian_fd,
    stability_report,
)
from .translation import (
    TranslationMatrix,
    momentum_space_G,
    translation_gradient,
    translation_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "EnergyResult",
    "default_l_max",
    "energy_T0",
    "free_energy_T",
    "lifshitz_plates",
    "log_det_integrand",
    "ClassicalConfig",
    "Container",
    "McEstimate",
    "SampleStream",
    "free_energy_quadrature",
    "grad_d_hamiltonian",
    "hamiltonian",
    "laplacian_F_estimator",
    "metropolis_run",
    "CapabilityError",
    "ConvergenceBudgetError",
    "GeometryError",
    "PrecisionError",
    "ToleranceError",
    "UnphysicalTruncationError",
    "ValidationError",
    "ZeroFrequencyError",
    "DispersionModel",
    "MaterialClass",
    "Medium",
    "classify",
    "eval_epsilon",
    "eval_mu",
    "SphereObject",
    "TMatrix",
    "definiteness",
    "fresnel_reflection",
    "mie_tmatrix",
    "EquilibriumResult",
    "StabilityReport",
    "find_axial_equilibrium",
    "force",
    "laplacian_decomposition",
    "laplacian_fd",
    "stability_report",
    "TranslationMatrix",
    "momentum_space_G",
    "translation_gradient",
    "translation_matrix",
    "__version__",
]
