"""trapcascade: multilevel trap dynamics from cascading jump functions.

The toolkit simulates the finite-volume tree trap model, its two scaling
limits (the revisiting and the aging cascades over stable-subordinator
jumps), and validates the aging correlation functions against their
closed-form Beta-product limits.
"""

from .streams import (PathKey, TailLaw, StableSpec, path_stream, pareto_sample,
                      pareto_array, beta_sample, stable_jump_set)
from .jumps import DomainExhausted, JumpFunction, ClockPart, clock_part
from .race import RaceOutcome, run_race, run_races_batch, run_race_bruteforce, stop_tail
from .cascade import (CfjfProvider, ZVector, Trajectory, simulate_cje,
                      simulate_cje_horizon, check_trajectory)
from .bdtm import (VolumeSpec, Environment, StateSpaceTooLarge, UnsupportedLevels,
                   direct_step, simulate_direct, bdtm_provider, BdtmProvider,
                   equilibrium_weights, stationary_oracle, occupation_direct)
from .limits import (RegimeSpec, KProcessProvider, AgingProcessProvider,
                     IidDepthProvider, k_process_provider, aging_process_provider,
                     iid_depth_provider, rescaled_bdtm, fine_tuned_volumes,
                     fine_tuning_deviation, z1_first_passage_pool,
                     z1_first_passage_fresh, z1_bdtm_rescaled, z1_k_process,
                     z1_aging_process)
from .aging import (AgingEstimate, DLSample, DLResult, estimate_pi, estimate_r,
                    estimate_novelty, pi_from_z_samples, f_limit, dl_no_jump_prob,
                    dl_empirical, laplace_exponent, incomplete_beta, ks_distance,
                    ks_two_sample, beta_cdf)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
