"""
wtapool - Equilibria of winners-take-all pools.

Exact probabilities, payoff tensors, closed-form best responses and
numerical Nash equilibria for pools where agents bet on independent Poisson
processes.
"""
__version__ = "0.1.0"
__author__ = "wtapool Contributors"
__description__ = "Equilibria of winners-take-all and Poisson-picking pools"

from wtapool.config import settings
from wtapool.errors import CapacityError, ConsistencyError, ConvergenceError, DomainError, WtaPoolError
from wtapool.models import (
    ComparisonProbs,
    DiversificationMetric,
    EquilibriumResult,
    MixedStrategy,
    OrderedPartition,
    OutcomeDistribution,
    Rates,
    SymmetricEquilibrium,
)
from wtapool.dist import argmax_set_distribution, compare, poisson_pmf
from wtapool.game import (
    PayoffTensor,
    exact_payoff_tensor,
    expected_payoff,
    induced_outcome_distribution,
    mc_payoff_tensor,
    realized_payoffs,
)
from wtapool.analytic import (
    boundary_curve,
    conjecture_probe,
    greedy_best_response,
    symmetric_eq_polynomial,
    symmetric_equilibria_two_process,
    two_agent_best_response,
)
from wtapool.solver import (
    best_response_dynamics,
    diversification_metric,
    find_symmetric_equilibrium,
    symmetric_regret,
)

__all__ = [
    "settings",
    "WtaPoolError",
    "DomainError",
    "CapacityError",
    "ConvergenceError",
    "ConsistencyError",
    "Rates",
    "ComparisonProbs",
    "OrderedPartition",
    "OutcomeDistribution",
    "MixedStrategy",
    "EquilibriumResult",
    "DiversificationMetric",
    "SymmetricEquilibrium",
    "poisson_pmf",
    "compare",
    "argmax_set_distribution",
    "PayoffTensor",
    "realized_payoffs",
    "induced_outcome_distribution",
    "exact_payoff_tensor",
    "mc_payoff_tensor",
    "expected_payoff",
    "greedy_best_response",
    "boundary_curve",
    "two_agent_best_response",
    "symmetric_eq_polynomial",
    "symmetric_equilibria_two_process",
    "conjecture_probe",
    "symmetric_regret",
    "find_symmetric_equilibrium",
    "best_response_dynamics",
    "diversification_metric",
]
