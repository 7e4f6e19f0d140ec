"""Chemotactic nanobot swarm simulator for targeted drug delivery."""

from .chemfield import (DepositLog, FieldParams, FieldSnapshot, SitePattern, find_spurious_maxima,
                        gamma_A, gamma_M, gamma_R, gamma_tot, grad_A, grad_M, grad_R, grad_tot)
from .config import ConfigError, ExperimentSpec, parse_config
from .engine import SimConfig, TrialResult, run_experiment, run_timestep, run_trial
from .metrics import MetricParams, s_avg, s_std, success, success_series, t_fin
from .motion import AgentState, Mode, MotionParams, step_agent
from .protocol import AlgorithmKind, ThresholdParams, decide_drops
from .scenarios import REFERENCE_DEFAULTS, arrangement, reference_defaults

__version__ = "0.1.0"
