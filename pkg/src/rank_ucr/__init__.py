"""Contextual ranking bandits with upper confidence ranking (UCR)."""
from .glm import GlmFamily, ItemParams, TheoryConstants, fit_mle, theoretical_xi, t0_lower_bound
from .matching import Assignment, brute_force, solve
from .rewards import AggregationSpec, expected_list_reward, instant_regret, optimal_slate
from .simenv import Context, Environment, Slate, generate_context, generate_environment, sample_outcomes
from .policies import GMLE, UCR, PolicyState, RandomPolicy, gmle_select, random_select, ucr_select, update
from .harness import ExperimentConfig, RegretCurve, run_experiment, run_one, write_csv

__version__ = "0.1.0"
