"""Sensing-aided secure multicast design for a two-level rotatable-antenna BS.

Library layout:

* :mod:`rotasec.geometry`  -- array geometry, steering, LoS channel synthesis
* :mod:`rotasec.sensing`   -- beam sweep, ML direction estimate, error bound,
  sampled angular uncertainty region
* :mod:`rotasec.objective` -- rate expressions, leakage surrogate, smooth min
* :mod:`rotasec.optimizer` -- manifold CG beamformer, projected-gradient
  rotation blocks, alternating driver
* :mod:`rotasec.harness`   -- seeded Monte-Carlo experiments, sweeps, exports
* :mod:`rotasec.config`    -- defaults, flat config files, unit conversion
* :mod:`rotasec.cli`       -- ``rotasec`` command line entry point
"""

from .geometry import (ArrayConfig, PolarPosition, RotationState, beam_gain,
                       channel_matrix, channel_vector, element_gain,
                       element_positions, receive_steering, rotation_matrix,
                       transmit_steering)
from .objective import (LinkBudget, ObjectiveContext, build_context,
                        evaluate_true_secrecy, softmin, softmin_objective,
                        surrogate_eav_rate, user_rate, weighted_eav_rate)
from .optimizer import (BeamformingSolution, ProblemData, SolverSettings,
                        ao_solve, solve_phi_arr, solve_varphi, solve_w)
from .sensing import (SensingConfig, SensingOutcome, crb, dft_codebook,
                      mle_estimate, point_mass_outcome, simulate_echoes,
                      uncertainty_region)

__all__ = [
    "ArrayConfig", "PolarPosition", "RotationState", "BeamformingSolution",
    "SolverSettings", "ProblemData", "LinkBudget", "ObjectiveContext",
    "SensingConfig", "SensingOutcome",
    "rotation_matrix", "element_positions", "transmit_steering",
    "receive_steering", "element_gain", "channel_vector", "channel_matrix",
    "beam_gain", "dft_codebook", "simulate_echoes", "mle_estimate", "crb",
    "uncertainty_region", "point_mass_outcome", "build_context", "user_rate",
    "weighted_eav_rate", "surrogate_eav_rate", "softmin", "softmin_objective",
    "evaluate_true_secrecy", "solve_w", "solve_phi_arr", "solve_varphi",
    "ao_solve",
]

__version__ = "0.1.0"
