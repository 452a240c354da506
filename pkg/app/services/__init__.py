from .allocation import allocate, finish_solution, inner_split
from .effective_channel import NormalizedChannels, align_phases, effective_gain, project_unit_modulus
from .experiment_service import SchemeRunner, compare, replay_plan, run_sweep
from .property_suite import run_property_suite
from .scenario import generate_scenario, load_config, profile_config, save_config
from .sca import (
    baseline_no_irs,
    baseline_random_phases,
    round_association,
    solve_general,
    solve_hybrid,
    solve_static,
    solve_ul_adaptive,
    solve_user_adaptive,
)
from .sdr import gaussian_randomize, solve_relaxed, solve_upper_bound

__all__ = [
    "allocate",
    "finish_solution",
    "inner_split",
    "NormalizedChannels",
    "align_phases",
    "effective_gain",
    "project_unit_modulus",
    "SchemeRunner",
    "compare",
    "replay_plan",
    "run_sweep",
    "run_property_suite",
    "generate_scenario",
    "load_config",
    "profile_config",
    "save_config",
    "baseline_no_irs",
    "baseline_random_phases",
    "round_association",
    "solve_general",
    "solve_hybrid",
    "solve_static",
    "solve_ul_adaptive",
    "solve_user_adaptive",
    "gaussian_randomize",
    "solve_relaxed",
    "solve_upper_bound",
]
