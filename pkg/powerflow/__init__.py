"""
Nonlinear AC power flow and its successive linear approximation
"""
from powerflow.linearization import (
    AccuracyStudy, BranchCoefficients, FlowCoefficients, OperatingPoint, UpdateResult, accuracy_study,
    branch_flows, evaluate_linear_flows, flow_coefficients, linearize, solve_base_power_flow, update_operating_point,
)
from powerflow.newton import NodalInjections, PowerFlowResult, build_ybus, solve_power_flow

__all__ = [
    "AccuracyStudy",
    "BranchCoefficients",
    "FlowCoefficients",
    "NodalInjections",
    "OperatingPoint",
    "PowerFlowResult",
    "UpdateResult",
    "accuracy_study",
    "branch_flows",
    "build_ybus",
    "evaluate_linear_flows",
    "flow_coefficients",
    "linearize",
    "solve_base_power_flow",
    "solve_power_flow",
    "update_operating_point",
]
