"""Optimal differentiated-service pricing for a congested network.

An ISP sells service classes that differ in congestion to users whose
valuations are spread over ``[0, 1]``. The package computes the
profit-maximising menu in closed form, for a fixed network capacity or
when capacity can be bought, and checks it against brute-force searches
over finite menus.
"""

from .discrete import (
    MarketOutcome,
    ServiceMenu,
    brute_force_menu,
    discretize_schedule,
    feasible_discretization,
    menu_from_thresholds,
    optimal_single_class,
    partition_demand,
    simulate_choices,
)
from .estimator import ServiceDifferentiation
from .exceptions import (
    AssumptionViolation,
    DomainError,
    EmptyClassError,
    IllConditionedError,
    InconsistencyError,
    InvalidParameterError,
    NoSolutionError,
    NumericalFailure,
    ServiceDiffError,
)
from .numerics import DEFAULT_NUMERICS, NumericsConfig
from .primitives import (
    INFINITY,
    QualityModel,
    ValuationDistribution,
    VirtualFunctions,
    canonical_quality,
    derive_virtual_functions,
    inverse_congestion_quality,
    linear_quality,
    make_distribution,
    make_power_distribution,
    make_quality,
    payg_transform,
)
from .schedule import (
    PriceSchedule,
    capacity_profile,
    ic_violation,
    indirect_utility,
    profit,
    recover_prices,
    user_surplus,
)
from .solver import (
    ABUNDANT,
    INTERIOR,
    CapacityCost,
    ChoiceSchedule,
    abundance_threshold,
    bunching_threshold,
    consumption,
    expansion_cost,
    free_cost,
    linear_cost,
    schedule_at_price,
    shadow_price_curve,
    solve_fixed,
    solve_variable,
)

__version__ = "0.1.0"
