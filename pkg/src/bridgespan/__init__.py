"""Economic bridge span: analytic cost optimum and a from-scratch DQN gridworld."""

from bridgespan.cost_model import (
    COMPOSITE,
    CONCRETE,
    DEFAULT_MATERIALS,
    STEEL,
    CostBreakdown,
    EconomicSpanResult,
    MaterialCostParams,
    balance_ratio,
    cost_derivative,
    economic_span_closed_form,
    economic_span_numeric,
    total_cost,
    unit_area_cost,
)
from bridgespan.environment import Action, BridgeSpanEnv, EnvConfig, StepResult

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BridgeSpanEnv",
    "COMPOSITE",
    "CONCRETE",
    "CostBreakdown",
    "EconomicSpanResult",
    "EnvConfig",
    "MaterialCostParams",
    "DEFAULT_MATERIALS",
    "STEEL",
    "StepResult",
    "balance_ratio",
    "cost_derivative",
    "economic_span_closed_form",
    "economic_span_numeric",
    "total_cost",
    "unit_area_cost",
]
