"""Fair multi-channel multiple access under bandit feedback."""

from .adaptive import (AdaptiveScheduler, SingleChannelScheduler, adaptive_decide, adaptive_init,
                       adaptive_update, importance_estimate, single_channel_init, single_channel_update,
                       theorem1_params)
from .assignment import Assignment, Feedback
from .config import ConfigError, RunConfig, load_config, parse_config
from .environment import RunTrace, SuccessSchedule, draw_feedback, running_utility, simulate, solve_p2_reference
from .experiment import emit_csv, run_experiment
from .polytope import (BvnDecomposition, StochMatrix, bvn_decompose, kl_project, max_weight_matching,
                       round_to_birkhoff, sample_permutation)
from .ucb import UcbScheduler, delta_schedule, exploration_assignment, ucb_index, ucb_init, ucb_step
from .utility import UtilitySpec, eval_phi, solve_gamma, subgradient_bound

__version__ = "0.1.0"
