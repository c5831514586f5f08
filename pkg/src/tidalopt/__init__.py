"""Adjoint-based optimal control of a shallow-water tidal model on a rectangular basin."""

from .adjoint import AdjointSources, AdjointTrajectory, duality_check, solve_adjoint, solve_tangent, taylor_test
from .config import ConfigError, ScenarioConfig, default_config, parse_config, validate_config
from .cost import (
    CostSpec,
    GeneralCost,
    eval_cost,
    hamiltonian_gap,
    pontryagin_residual,
    quadratic_cost,
    reduced_gradient,
    second_order_scan,
)
from .fileio import FieldFormatError, read_field, read_trajectory, write_field, write_trajectory
from .forward import StateTrajectory, TidalModel, TimeGrid, cfl_max_dt, solve_forward
from .grid import Grid, SolverError
from .model import Bathymetry, PhysicalParams, assemble_forcing, b_apply, b_jacobian_apply
from .optimize import OptimizeSettings, assimilate_initial, minimize_control, uniqueness_horizon
from .verify import PropertyReport, bound_monitors, gradient_fd_check, inequality_suite, operator_property_suite

__all__ = [
    "AdjointSources", "AdjointTrajectory", "Bathymetry", "ConfigError", "CostSpec", "FieldFormatError",
    "GeneralCost", "Grid", "OptimizeSettings", "PhysicalParams", "PropertyReport", "ScenarioConfig",
    "SolverError", "StateTrajectory", "TidalModel", "TimeGrid", "assemble_forcing", "assimilate_initial",
    "b_apply", "b_jacobian_apply", "bound_monitors", "cfl_max_dt", "default_config", "duality_check",
    "eval_cost", "gradient_fd_check", "hamiltonian_gap", "inequality_suite", "minimize_control",
    "operator_property_suite", "parse_config", "pontryagin_residual", "quadratic_cost", "read_field",
    "read_trajectory", "reduced_gradient", "second_order_scan", "solve_adjoint", "solve_forward",
    "solve_tangent", "taylor_test", "uniqueness_horizon", "validate_config", "write_field", "write_trajectory",
]
