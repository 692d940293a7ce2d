"""Robust MILP planning of edge-network link hardening under
decision-dependent delay uncertainty."""

__version__ = "0.1.0"

from .instance import GenConfig, Instance, generate, load, save, validate
from .milp import LinExpr, MilpModel, ModelStats, Variable, VarRef, stats, write_lp, write_mps
from .formulations import (
    SdduScenarioSet, Solution, build_det, build_erddu, build_nh, build_rddu,
    build_ro_nh, build_sddu, extract_solution, sddu_scenarios,
)
from .solver import SolverConfig, SolverResult, probe_backends, solve
from .oracle import brute_force_optimal, inner_max_greedy, worst_case_cost, worst_case_delay
from .evaluate import (
    EvaluationReport, Scenario, actual_allocation, actual_cost,
    compare_schemes, rand_hardening, sample_scenarios, sweep,
)
