"""Lindblad master-equation propagation with full and stochastically bundled
Davies dissipators, jackknife bias correction and benchmark harnesses."""

from .config import ScenarioConfig
from .dissipator import (
    BundledDissipator,
    DaviesDissipator,
    LindbladSet,
    RandomVectorKind,
    build_bundled,
    bundle_rng,
    sample_random_vector,
)
from .errors import (
    AlignmentError,
    ConfigError,
    ContractViolation,
    DegenerateStateError,
    HermiticityDriftError,
    InsufficientSampleError,
    IntegrationError,
    LindbundleError,
    ParameterError,
)
from .model import MorseParams, build_grid, build_model, initial_amplitudes, initial_state
from .propagator import PropagationConfig, Trajectory, evolve, evolve_combined, rk4_step
from .spectral import (
    BohrDecomposition,
    CouplingParams,
    EigenSystem,
    coupling_gamma,
    davies_decomposition,
    eigendecompose,
    enumerate_bohr,
    thermal_state,
)
from .stats import ensemble_stats, fit_power_law, jackknife1, jackknife2, max_rmse

__version__ = "0.1.0"
