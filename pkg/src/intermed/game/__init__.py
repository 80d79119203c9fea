"""Menu-posting game between competing intermediaries and divisible agents."""

from .allocation import (
    ADVERSARIAL,
    FAVOR_TARGET,
    LOWEST_INDEX,
    SPLIT_UNIFORM,
    Allocation,
    MenuProfile,
    TieBreakRule,
    allocate,
    intermediary_profit,
    iter_selection_allocations,
)
from .search import (
    DeviationWitness,
    Equilibrium,
    PriceGrid,
    deviation_search,
    enumerate_equilibria,
)
from .verify import (
    BadEquilibriumWitness,
    VerificationResult,
    construct_bad_equilibrium,
    verify_full_implementation,
    verify_partial_implementation,
)
from .monopoly import MonopolyReport, build_quality_ladder, monopoly_verify

__all__ = [
    "ADVERSARIAL",
    "FAVOR_TARGET",
    "LOWEST_INDEX",
    "SPLIT_UNIFORM",
    "Allocation",
    "BadEquilibriumWitness",
    "DeviationWitness",
    "Equilibrium",
    "MenuProfile",
    "MonopolyReport",
    "PriceGrid",
    "TieBreakRule",
    "VerificationResult",
    "allocate",
    "build_quality_ladder",
    "construct_bad_equilibrium",
    "deviation_search",
    "enumerate_equilibria",
    "intermediary_profit",
    "iter_selection_allocations",
    "monopoly_verify",
    "verify_full_implementation",
    "verify_partial_implementation",
]
