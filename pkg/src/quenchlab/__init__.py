"""Numerical laboratory for information thermodynamics of a quenched 1D field.

Pipeline: prepare a gapped thermal state of two tunnel-coupled 1D
quasicondensates, quench the tunnelling to zero, evolve the Gaussian state,
synthesize phase-interference measurements, tomographically reconstruct the
covariance matrix over time, and decompose the generalised entropy production
into its thermodynamic and information-theoretic parts with bootstrap
uncertainties.
"""

__version__ = "0.1.0"

from .errors import QuenchLabError
from .gaussian import (
    CovarianceMatrix,
    PhaseSpaceLayout,
    QuadraticHamiltonian,
    WilliamsonDecomposition,
    check_physicality,
    mean_energy,
    mutual_information,
    propagate,
    restrict,
    symplectic_eigenvalues,
    thermal_covariance,
    von_neumann_entropy,
    williamson,
)
from .field import (
    FieldParameters,
    ModeBasis,
    PartitionSpec,
    derived_scales,
    effective_beta,
    environment_hamiltonian,
    g1d_from_scattering,
    gibbs_energy,
    gibbs_log_partition,
    kg_hamiltonian,
    mode_basis,
    momentum_to_real,
    psf_blur,
    real_to_momentum,
    relative_entropy_to_gibbs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
