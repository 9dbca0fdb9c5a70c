"""Flux-driven non-Hermitian Rice-Mele ring: Bloch bands, complex Berry phases,
adiabatic and quasi-adiabatic dynamics, and wave-packet observables."""

__version__ = "0.1.0"

from .bloch import (
    BlochBlock,
    EigenPair,
    FieldVector,
    SpectrumClass,
    band_energy,
    bloch_block,
    classify_spectrum,
    eigensystem,
    field_vector,
    lambda_offdiag,
)
from .config import RunConfig, validate_config
from .estimators import BandProjector, FluxEvolver
from .evolution import (
    EvolutionReport,
    Trajectory,
    adiabatic_reference,
    amplification_factor,
    evolve_eigenstate,
    evolve_state,
    fidelity,
    propagate_bloch,
    propagate_real_space,
)
from .exceptions import (
    ConfigError,
    DelocalizedError,
    ExceptionalPoint,
    QuadratureError,
    RegimeError,
    StepSizeError,
    TailWrapError,
)
from .model import KGrid, ModelParams, build_hamiltonian, k_grid
from .phases import (
    PhaseResult,
    SweepSpec,
    closed_form_phases,
    dynamic_phase,
    geometric_phase,
    phase_result,
    sign_of_im_gamma,
)
from .protocols import Constant, GaussianPulse, Linear, TimeGrid
from .wavepacket import (
    GaussianSpec,
    band_collapse_run,
    band_decompose,
    build_gaussian,
    center_trajectory,
    reduced_energy,
)
