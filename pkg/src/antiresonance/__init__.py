"""Cavity transmission antiresonances of dipole-coupled emitter arrays."""

from .analysis import (antiresonance_depth, antiresonance_width, band_structure,
                       fit_lorentzian, optimal_cooperativity, solve_cavity_tuning,
                       tuned_cooperativity, tuned_resonances)
from .errors import (AmbiguityError, BracketError, CoincidentEmittersError, ConfigError,
                     ConvergenceError, DecoupledStateError, DimensionCapError, DomainError,
                     ModelError)
from .geometry import (CouplingMatrices, EmitterArray, angular_factor_F, angular_factor_G,
                       build_coupling_matrices, make_chain, make_grid)
from .modes import (CouplingVector, TemMode, coupling_vector_eigenmode, coupling_vector_pattern,
                    coupling_vector_tem, hermite, tem_profile)
from .oracle import OracleConfig, compare_linearization, steady_state_rho
from .steady_state import (CavityParams, ScanResult, SpectrumPoint, SystemModel, cavity_field,
                           effective_cooperativity, effective_response, interaction_matrix,
                           scan_spectrum, single_emitter_transmission, transmission_point)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError", "BracketError", "CavityParams", "CoincidentEmittersError", "ConfigError",
    "ConvergenceError", "CouplingMatrices", "CouplingVector", "DecoupledStateError",
    "DimensionCapError", "DomainError", "EmitterArray", "ModelError", "OracleConfig",
    "ScanResult", "SpectrumPoint", "SystemModel", "TemMode", "angular_factor_F",
    "angular_factor_G", "antiresonance_depth", "antiresonance_width", "band_structure",
    "build_coupling_matrices", "cavity_field", "compare_linearization",
    "coupling_vector_eigenmode", "coupling_vector_pattern", "coupling_vector_tem",
    "effective_cooperativity", "effective_response", "fit_lorentzian", "hermite",
    "interaction_matrix", "make_chain", "make_grid", "optimal_cooperativity",
    "scan_spectrum", "single_emitter_transmission", "solve_cavity_tuning",
    "steady_state_rho", "tem_profile", "transmission_point", "tuned_cooperativity",
    "tuned_resonances",
]
