"""Foresighted demand-side management: per-entity MDPs coordinated through
conjectured prices on a DC power network."""

from .cdf import (CdfParseError, GridModel, GridValidationError,
                  assign_entities, parse_cdf)
from .centralized import IntractableError, centralized_solve
from .config import ConfigError, ExperimentConfig, validate_config
from .constraints import ConstraintSet, assemble_constraints
from .coordinator import Coordinator
from .dcflow import NetworkError, build_ptdf, solve_dc_flows
from .entities import (AggregatorSpec, DemandProcess, GeneratorSpec,
                       build_aggregator_mdp, build_generator_mdp)
from .experiments import PRESETS, preset_config, run_experiment
from .mdp import TabularMdp, value_iterate
from .pds import PdsLearner
from .sim import cost_report, discounted_total, estimate_lmp, run_episode
from .system import SystemModel, build_system

__version__ = "0.1.0"

__all__ = [
    "AggregatorSpec", "CdfParseError", "ConfigError", "ConstraintSet",
    "Coordinator", "DemandProcess", "ExperimentConfig", "GeneratorSpec",
    "GridModel", "GridValidationError", "IntractableError", "NetworkError",
    "PRESETS", "PdsLearner", "SystemModel", "TabularMdp",
    "assemble_constraints", "assign_entities", "build_aggregator_mdp",
    "build_generator_mdp", "build_ptdf", "build_system", "centralized_solve",
    "cost_report", "discounted_total", "estimate_lmp", "parse_cdf",
    "preset_config", "run_episode", "run_experiment", "solve_dc_flows",
    "validate_config", "value_iterate",
]
