"""magsqueeze: dissipative simulation of critical-point magnon squeezing in a
cavity-magnon-qubit system.

Pipeline: raw physical parameters -> derived effective model (cavity
eliminated, two-tone drive) -> driven or rotating-frame master equation ->
quadrature squeezing, occupation and Wigner observables, cross-checked by an
independent Gaussian covariance oracle.
"""

from .config import ConfigError, NumericsConfig, RunConfig, ScenarioConfig
from .gaussian import (
    CovarianceState,
    closed_form_vacuum_variances,
    compare,
    drift_matrices,
    evolve_covariance,
    oracle_trajectory,
)
from .hamiltonians import (
    TimeDependentHamiltonian,
    build_driven_jc,
    build_effective_np,
    build_quadratic_magnon,
    build_rabi,
    build_three_mode,
)
from .lindblad import (
    CollapseTerm,
    IntegrationError,
    IntegratorSettings,
    LindbladModel,
    Trajectory,
    build_full_master,
    build_rabi_master,
    evolve,
    rhs,
)
from .observables import (
    QuadratureStats,
    WignerGrid,
    covariance,
    mean_occupation,
    min_variance,
    partial_trace_magnon,
    squeezing_db,
    wigner,
)
from .operators import HilbertSpec, TruncationError
from .params import DerivedParams, SystemParams, check_regime, derive, thermal_occupation

__version__ = "0.1.0"
