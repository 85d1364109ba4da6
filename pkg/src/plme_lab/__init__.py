"""Master-equation toolkit for a Rabi-driven qubit under classical colored noise.

Core pieces: generator parameters from the memory-kernel integrals (closed
form or quadrature), the 4th-order correction superoperator, exact stochastic
and deterministic baselines, and channel diagnostics (canonical rates, Choi
and process matrices, diamond/1-norm distances).
"""

__version__ = "0.1.0"

from .noise import NoiseModel, NoiseTrajectory, autocorr, cosint, sample_trajectory, sinint
from .plme import (DriveProfile, PlmeParams, gamma_x_closed, interaction_A,
                   jump_operators, plme_liouvillian, plme_params_closed,
                   plme_params_quadrature, r4_superoperator, zeroth_order_liouvillian,
                   zeroth_order_rate)
from .evolve import (EnsembleConfig, EnsembleResult, QuantumMap, evolve_state,
                     exact_ensemble, exact_trajectory, expectation,
                     propagate_generator, quasistatic_exact_map)
from .channel import (BlochScan, CanonicalGenerator, ChannelDistance, ProcessMatrix,
                      canonical_decompose, channel_distance, choi, diamond_distance,
                      instantaneous_generator, match_rates, nonphysical_state_scan,
                      one_norm_distance, process_matrix)

__all__ = [name for name in dir() if not name.startswith("_")]
