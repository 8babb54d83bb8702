"""Online decision making on the simplex with costs on the running average of recent decisions."""

from .adversaries import Cyc, CsvCosts, LowerBound, StocHet, StocId, cyc, lower_bound_adversary, stoc_het, stoc_id
from .algorithms import (FTARL, FTPL, LSA, FreshFTPL, delta_schedule, epsilon_schedule, epsilon_schedule_theta,
                         fast_episode, run_episode)
from .analysis import (RegretReport, RegularizerSpec, argmin_oracle, corollary43_bound, policy_regret, regret,
                       theorem42_bound, verify_ftarl_inequality, verify_ftl_inequality)
from .core import (ConfigError, EpisodeConfig, HistoryState, InvariantError, Trajectory, exp_draw, state_advance,
                   state_init)
from .harness import ExperimentConfig, run_experiment
from .verify import verify_all

__version__ = "0.1.0"
